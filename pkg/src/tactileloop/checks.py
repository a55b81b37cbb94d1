"""Quantitative self-checks behind the `check` CLI command.

Each check is independent and defensive: a config that breaks one check
fails that line instead of aborting the run, so a census violation and a
resolution regression show up side by side.
"""

from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple

from .actuation import quantize26
from .sensing import effective_steps
from .session import (SessionConfig, config_from_dict, coupling_score, run_session)

STEPS_LOW, STEPS_HIGH = 100, 110   # tuned census target 105, +/- 5
CENSUS_SPACING = 1e-4
COUPLING_FACTOR = 3.0


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _config(doc: dict, validate: bool = True) -> SessionConfig:
    return config_from_dict(doc, validate=validate)


def check_effective_steps(doc: dict) -> CheckResult:
    cfg = _config(doc, validate=False)
    steps = effective_steps(cfg.light, cfg.sensor)
    ok = STEPS_LOW <= steps <= STEPS_HIGH
    return CheckResult("effective-steps", ok,
                       f"{steps} distinct detected steps (want {STEPS_LOW}-{STEPS_HIGH})")


def check_level_census(doc: dict) -> CheckResult:
    cfg = _config(doc, validate=False)
    n = round(2.0 / CENSUS_SPACING)
    seen: set[int] = set()
    prev_level = 0
    monotone = True
    idempotent = True
    for k in range(n + 1):
        u = -1.0 + k * CENSUS_SPACING
        level, u_q = quantize26(u)
        seen.add(level)
        if level < prev_level:
            monotone = False
        prev_level = level
        if quantize26(u_q)[0] != level:
            idempotent = False
    ok = (seen == set(range(26)) and len(seen) == cfg.actuator.levels
          and monotone and idempotent)
    return CheckResult(
        "actuator-level-census", ok,
        f"{len(seen)} distinct levels emitted, config declares {cfg.actuator.levels}, "
        f"monotone={monotone}, idempotent={idempotent}")


def check_rate_exactness(doc: dict) -> CheckResult:
    cfg = replace(_config(doc), duration_s=1.0)
    trace = run_session(cfg)
    want = (cfg.sensor.rate_hz, cfg.actuator.rate_hz, cfg.physics_rate_hz)
    got = (len(trace.sensor_rows), len(trace.actuator_rows), len(trace.physics_rows))
    return CheckResult("rate-exactness", got == want,
                       f"1 s rows sensor/actuator/physics = {got}, want {want}")


def check_coupling(doc: dict) -> CheckResult:
    cfg = _config(doc)
    score = coupling_score(run_session(cfg))
    rigid_cfg = replace(cfg, physics=replace(cfg.physics,
                                             k_hand=cfg.physics.k_hand * 1000.0,
                                             c_hand=cfg.physics.c_hand * 100.0))
    rigid = coupling_score(run_session(rigid_cfg))
    if score is None:
        return CheckResult("coupling-vs-rigid", False, "no trigger in trace, score undefined")
    rigid_value = rigid if rigid is not None else 0.0
    ok = score > COUPLING_FACTOR * max(rigid_value, 0.0)
    return CheckResult("coupling-vs-rigid", ok,
                       f"score {score:.4f} vs rigid baseline {rigid_value:.4f} "
                       f"(want > {COUPLING_FACTOR}x)")


def run_checks(doc: dict) -> list[CheckResult]:
    checks = (check_effective_steps, check_level_census,
              check_rate_exactness, check_coupling)
    results = []
    for check in checks:
        try:
            results.append(check(doc))
        except Exception as exc:  # a broken config fails the check, not the run
            name = check.__name__.removeprefix("check_").replace("_", "-")
            results.append(CheckResult(name, False, f"error: {exc}"))
    return results
