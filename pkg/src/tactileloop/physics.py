"""Plant model: coil force on the hand-held magnet and the hand holding it.

The magnet moves on the coil axis only.  Three forces act on it:

- the coil, ``F = f_ref * u / (1 + z/z0)**4`` with drive u in [-1, +1]
  (positive u = rejection, pushing the magnet away from the coil),
- the hand, modelled as a spring-damper pulling the magnet towards the
  position the player intends (``k_hand``, ``c_hand``),
- nothing else: the hand carries the magnet's weight, so gravity is
  absorbed into the impedance model.

Sign conventions
----------------
z is the axial distance above the coil face (metres, always >= z_floor).
Positive force points away from the coil.  Drive u = -1 maps to zero
coil current (the coil core is magnetised by the nearby permanent magnet,
which attracts it); u = +1 maps to the full 2 A (maximal rejection).
Current therefore never reverses sign.

Integration is semi-implicit Euler at 4 kHz: velocity first, then
position.  Contact with the stop at z_floor is inelastic (v := 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

I_MAX_A = 2.0  # coil current ceiling, amperes


@dataclass(frozen=True)
class PhysicsConfig:
    """Plant parameters.  All strictly positive.

    f_ref : coil force at contact under full drive, newtons.  The default
        (4.0 N) makes full rejection at contact dominate the default hand
        stiffness, so pressing the magnet onto the coil single-handedly
        stalls well above the contact stop.
    z0 : force decay length, metres.  With the inverse-quartic law a full
        drive swing still moves the force by ~6 mN at z = 0.10 m, which
        keeps fluctuations perceivable out to 10 cm.
    m : effective moving mass (magnet plus the hand mass it drags), kg.
    k_hand, c_hand : hand impedance; the hand acts as a spring-damper
        tracking the intended trajectory.
    i_max : maximum coil current, amperes.
    z_floor : contact stop, metres; the magnet cannot go below it.
    dt : physics step, seconds.  Must divide the I/O rates; 1/4000 s is an
        integer multiple of both the 100 Hz and 200 Hz pipelines.
    """

    f_ref: float = 4.0
    z0: float = 0.02
    m: float = 0.02
    k_hand: float = 40.0
    c_hand: float = 1.2
    i_max: float = I_MAX_A
    z_floor: float = 0.001
    dt: float = 1.0 / 4000.0

    def validate(self) -> None:
        for name in ("f_ref", "z0", "m", "k_hand", "c_hand", "i_max", "z_floor", "dt"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"physics.{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class MagnetState:
    """Axial state of the hand-held magnet: position, velocity, time."""

    z: float
    v: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class HandTarget:
    """Where the hand intends to be; the plant tracks it through the spring."""

    z_target: float
    v_target: float = 0.0


def drive_to_current(u: float, i_max: float = I_MAX_A) -> float:
    """Map normalized drive in [-1, +1] to coil current in amperes.

    Affine and monotone: u = -1 gives 0 A, u = +1 gives i_max.  The current
    never goes negative; attraction comes from core magnetisation at low
    current, not from reversing the coil.  Out-of-range u is clamped.
    """
    u = min(1.0, max(-1.0, u))
    return i_max * (u + 1.0) / 2.0


def coil_force(u: float, z: float, f_ref: float = 4.0, z0: float = 0.02) -> float:
    """Net axial force on the magnet in newtons, positive = rejection.

    F(u, z) = f_ref * u / (1 + z/z0)**4.  Linear in the drive (so the
    26-level quantizer is directly visible in the force) and steeply
    decaying in distance, as a dipole near a short coil is.  u < 0 models
    the attracting pull of the magnetised core at low current.
    """
    if z < 0:
        raise ValueError(f"coil_force needs z >= 0, got {z}")
    u = min(1.0, max(-1.0, u))
    return f_ref * u / (1.0 + z / z0) ** 4


def hand_force(state: MagnetState, target: HandTarget, cfg: PhysicsConfig) -> float:
    """Spring-damper force the hand applies to keep the magnet on its track."""
    return cfg.k_hand * (target.z_target - state.z) + cfg.c_hand * (target.v_target - state.v)


def net_force(state: MagnetState, u: float, target: HandTarget, cfg: PhysicsConfig) -> float:
    """Total axial force used by the integrator (coil + hand)."""
    return coil_force(u, state.z, cfg.f_ref, cfg.z0) + hand_force(state, target, cfg)


def step(state: MagnetState, u: float, target: HandTarget, cfg: PhysicsConfig) -> MagnetState:
    """Advance the magnet by exactly one dt (semi-implicit Euler).

    Velocity is updated from the force at the current position, then the
    position is updated with the new velocity.  If the position would cross
    the contact stop, it is clamped to z_floor and the velocity zeroed
    (inelastic contact -- no restitution).
    """
    a = net_force(state, u, target, cfg) / cfg.m
    v = state.v + a * cfg.dt
    z = state.z + v * cfg.dt
    if z < cfg.z_floor:
        z = cfg.z_floor
        v = 0.0
    return MagnetState(z=z, v=v, t=state.t + cfg.dt)
