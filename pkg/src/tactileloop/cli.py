"""Command line entry points.

    tactileloop simulate --config cfg.json --out run1/ [--set key=value ...]
    tactileloop check    [--config cfg.json] [--set key=value ...]
    tactileloop serve    [--config cfg.json] [--bind ADDR:PORT] [--ui DIR]

`simulate` runs a scripted session as fast as it can and writes the trace
CSVs, the JSON meta file and the strip-chart figure into the output
directory.  `check` runs the quantitative self-checks against a config
and prints one PASS/FAIL line per check.  `serve` starts the live
WebSocket session for the browser UI.

Exit codes: 0 success, 1 usage/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .session import (ConfigError, SessionConfig, config_from_dict, config_to_dict,
                      coupling_score, export_trace, run_session)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def load_config_doc(path: str | None, overrides: list[str]) -> dict:
    """Read the config document (or start from defaults) and apply --set overrides."""
    if path is None:
        doc = config_to_dict(SessionConfig())
    else:
        try:
            with open(path, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    for item in overrides:
        apply_override(doc, item)
    return doc


def apply_override(doc: dict, item: str) -> None:
    """Apply one --set KEY=VALUE override; KEY is a dotted path into the config."""
    if "=" not in item:
        raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"--set needs a non-empty key, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings (e.g. preset names) pass through
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = {}
            node[part] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {key}: {part} is not a config section")
        node = nxt
    node[parts[-1]] = value


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = load_config_doc(args.config, args.set)
    cfg = config_from_dict(doc)
    trace = run_session(cfg)
    try:
        written = export_trace(trace, args.out)
    except OSError as exc:
        print(f"error: cannot write trace to {args.out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.no_figure:
        from .report import FIGURE_FILE, render_trace_figure  # deferred: matplotlib is slow
        import os
        written.append(render_trace_figure(trace, os.path.join(args.out, FIGURE_FILE)))
    score = coupling_score(trace)
    print(f"triggers: {trace.trigger_count}")
    print(f"coupling_score: {'undefined (no trigger)' if score is None else f'{score:.4f}'}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    from .checks import run_checks  # deferred: pulls in the whole pipeline
    doc = load_config_doc(args.config, args.set)
    results = run_checks(doc)
    all_pass = True
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        all_pass &= result.passed
        print(f"{status}  {result.name}: {result.detail}")
    return EXIT_OK if all_pass else EXIT_RUNTIME


def cmd_serve(args: argparse.Namespace) -> int:
    doc = load_config_doc(args.config, args.set)
    cfg = config_from_dict(doc)
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"--bind needs ADDR:PORT, got {args.bind!r}")
    from .server import serve  # deferred: uvicorn/fastapi are heavy imports
    serve(cfg, host=host, port=int(port_text), ui_dir=args.ui)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tactileloop",
        description="Closed tactile loop simulator: magnet, light sensing, coil drive.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="session config JSON (defaults to the built-in profile)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override a config field by dotted path (repeatable)")

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run a scripted session and export its trace")
    p_sim.add_argument("--out", metavar="DIR", required=True,
                       help="output directory for CSVs, meta and figure")
    p_sim.add_argument("--no-figure", action="store_true",
                       help="skip rendering the strip-chart figure")
    p_sim.set_defaults(func=cmd_simulate)

    p_check = sub.add_parser("check", parents=[common],
                             help="run the quantitative self-checks")
    p_check.set_defaults(func=cmd_check)

    p_serve = sub.add_parser("serve", parents=[common],
                             help="serve a live session over WebSocket + HTTP")
    p_serve.add_argument("--bind", metavar="ADDR:PORT", default="127.0.0.1:8000")
    p_serve.add_argument("--ui", metavar="DIR", default=None,
                         help="directory of static UI assets to serve")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
