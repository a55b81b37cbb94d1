"""Strip-chart figures rendered from session traces.

The canonical view of a session is the dual strip chart: sensed proximity
on top, actuator drive below, shared time axis, time increasing to the
right.  Strikes are marked on both panels so the force bursts can be read
against the dents they leave in the proximity stream.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")  # file output only, never a window

import matplotlib.pyplot as plt

from .session import SessionTrace

FIGURE_FILE = "trace.png"


def render_trace_figure(trace: SessionTrace, path: str, dpi: int = 140) -> str:
    """Draw the proximity/drive dual strip chart of a trace to `path`."""
    fig, (ax_in, ax_out) = plt.subplots(
        2, 1, sharex=True, figsize=(9.0, 4.8),
        gridspec_kw={"hspace": 0.12})

    t_sensor = [row.t for row in trace.sensor_rows]
    ax_in.step(t_sensor, [row.proximity for row in trace.sensor_rows],
               where="post", color="#1f77b4", linewidth=1.0)
    ax_in.set_ylabel("proximity")
    ax_in.set_ylim(-0.05, 1.05)
    ax_in.axhline(trace.meta.behaviour.p_trig, color="#999999",
                  linewidth=0.8, linestyle="--")

    t_act = [row.t for row in trace.actuator_rows]
    ax_out.step(t_act, [row.u_q for row in trace.actuator_rows],
                where="post", color="#d62728", linewidth=1.0)
    ax_out.set_ylabel("drive u_q")
    ax_out.set_ylim(-1.1, 1.1)
    ax_out.axhline(0.0, color="#999999", linewidth=0.8)
    ax_out.set_xlabel("time [s]")

    for ev in trace.sound_events:
        for ax in (ax_in, ax_out):
            ax.axvline(ev.t, color="#2ca02c", linewidth=0.8, alpha=0.7)

    ax_in.set_title("sensed proximity (top) and actuator drive (bottom)")
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path
