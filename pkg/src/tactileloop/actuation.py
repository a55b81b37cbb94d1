"""Drive output path: sample-hold to 200 Hz, 26 levels, coil current.

The behaviour engine produces an arbitrary signal at the internal control
rate; the output stage picks the instantaneous sample at each 5 ms output
tick and quantizes it to 26 levels between maximal attraction (-1, 0 A)
and maximal rejection (+1, 2 A).  There is deliberately no filtering or
averaging before the downsampling: a full-swing block pulse lands in the
output at full amplitude within a single frame, which is what gives the
percussive behaviours their edge.  The price is ordinary aliasing --
anything between the sample instants is simply never seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .physics import I_MAX_A, drive_to_current
from .sensing import round_half_up

LEVELS = 26


@dataclass(frozen=True)
class ActuatorConfig:
    """Output stage geometry: 26 levels at 200 Hz, fed at the control rate."""

    levels: int = LEVELS
    rate_hz: int = 200
    control_rate_hz: int = 4000
    i_max: float = I_MAX_A

    def validate(self) -> None:
        if self.levels != LEVELS:
            raise ValueError(f"actuator.levels must be {LEVELS}, got {self.levels!r}")
        if self.rate_hz <= 0:
            raise ValueError(f"actuator.rate_hz must be positive, got {self.rate_hz!r}")
        if self.control_rate_hz % self.rate_hz != 0:
            raise ValueError(
                "actuator.control_rate_hz must be an integer multiple of rate_hz, "
                f"got {self.control_rate_hz!r} vs {self.rate_hz!r}")
        if self.i_max <= 0:
            raise ValueError(f"actuator.i_max must be positive, got {self.i_max!r}")


@dataclass(frozen=True)
class ActuatorFrame:
    """One 5 ms output sample: level 0-25, its drive value, coil current."""

    t: float
    level: int
    u_q: float
    current: float


def quantize26(u: float) -> tuple[int, float]:
    """Quantize drive in [-1, +1] to one of 26 levels; ties round up.

    Returns (level, u_q) with u_q = -1 + 2*level/25.  26 is even, so no
    level sits exactly at zero drive: neutral input lands on level 13
    (u_q = +0.04), an honest artifact of the output resolution.
    Re-quantizing any emitted u_q returns the same level.
    """
    u = min(1.0, max(-1.0, u))
    level = min(25, max(0, round_half_up((u + 1.0) * 25.0 / 2.0)))
    return level, -1.0 + 2.0 * level / 25.0


def downsample_hold(drive: Sequence[float], frame_index: int,
                    cfg: ActuatorConfig | None = None) -> float:
    """Instantaneous control-rate sample at output frame `frame_index`.

    No averaging, no interpolation: the sample at t = frame_index/rate_hz
    is returned as-is, so sharp block pulses survive and between-frame
    spikes vanish.
    """
    cfg = cfg or ActuatorConfig()
    stride = cfg.control_rate_hz // cfg.rate_hz
    return drive[frame_index * stride]


def emit_frame(drive: Sequence[float], frame_index: int,
               cfg: ActuatorConfig | None = None) -> ActuatorFrame:
    """Build the output frame for one 5 ms tick from the control-rate drive."""
    cfg = cfg or ActuatorConfig()
    u = downsample_hold(drive, frame_index, cfg)
    level, u_q = quantize26(u)
    return ActuatorFrame(
        t=frame_index / cfg.rate_hz,
        level=level,
        u_q=u_q,
        current=drive_to_current(u_q, cfg.i_max),
    )
