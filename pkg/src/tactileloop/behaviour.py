"""Programmable behaviour: the percussive strike.

Crossing a proximity threshold on the way in triggers two things at once:

- synthesis of a low percussive sound (decaying sine), and
- a maximal rejecting force, heavily modulated by a gradually decreasing
  triangular wave that swings between rejection and attraction.

Striking the device therefore feels like hitting a surface that rings:
the force burst dies away together with the sound.  The trigger re-arms
only after the proximity falls a hysteresis step below the threshold, so
sensor dither at the threshold cannot fire it twice.

A retrigger during an active burst restarts the envelope: a percussionist
striking twice expects two hits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

AUDIO_RATE_HZ = 44100


@dataclass(frozen=True)
class BehaviourSpec:
    """Parameters of the percussive behaviour.

    p_trig : proximity that fires the strike, in (0, 1).
    rearm_hyst : how far proximity must fall below p_trig to re-arm.
    t_decay : force-burst duration; the envelope reaches zero here.
    f_mod : triangular modulation frequency of the force burst, Hz.
        The default divides the 200 Hz output rate, so every modulation
        period puts one output sample exactly on the triangle peak and
        the rendered burst decays monotonically period by period.
    f_sound, tau_sound, amp_sound : decaying-sine sound parameters.
    """

    p_trig: float = 0.8
    rearm_hyst: float = 0.1
    t_decay: float = 0.8
    f_mod: float = 25.0
    f_sound: float = 80.0
    tau_sound: float = 0.25
    amp_sound: float = 0.9

    def validate(self, control_rate_hz: int = 4000) -> None:
        if not 0.0 < self.p_trig < 1.0:
            raise ValueError(f"behaviour.p_trig must be in (0, 1), got {self.p_trig!r}")
        if self.rearm_hyst < 0:
            raise ValueError(f"behaviour.rearm_hyst must be >= 0, got {self.rearm_hyst!r}")
        if self.t_decay <= 0:
            raise ValueError(f"behaviour.t_decay must be positive, got {self.t_decay!r}")
        if not 0.0 < self.f_mod < control_rate_hz / 2:
            raise ValueError(
                f"behaviour.f_mod must be in (0, control_rate/2), got {self.f_mod!r}")
        for name in ("f_sound", "tau_sound", "amp_sound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"behaviour.{name} must be positive, got {getattr(self, name)!r}")


@dataclass
class BehaviourState:
    """Trigger bookkeeping: armed flag, last trigger instant, hit count."""

    armed: bool = True
    last_trigger_t: float | None = None
    trigger_count: int = 0


@dataclass(frozen=True)
class SoundEvent:
    """One strike: when it happened and the sound parameters to render."""

    t: float
    f_sound: float
    tau_sound: float
    amp_sound: float


def detect_trigger(p_prev: float, p_now: float, t_now: float,
                   spec: BehaviourSpec, state: BehaviourState) -> bool:
    """Edge-trigger with hysteresis; mutates `state`, returns True on fire.

    Fires only when armed and the proximity rises through p_trig between
    two consecutive frames.  Firing disarms; falling to or below
    p_trig - rearm_hyst re-arms.  Re-arm and fire cannot happen on the
    same frame (the conditions exclude each other).
    """
    if not state.armed and p_now <= spec.p_trig - spec.rearm_hyst:
        state.armed = True
    if state.armed and p_prev < spec.p_trig <= p_now:
        state.armed = False
        state.last_trigger_t = t_now
        state.trigger_count += 1
        return True
    return False


def triangle_from_peak(phase: float) -> float:
    """Unit triangular wave starting at its +1 peak; phase in periods."""
    phase -= math.floor(phase)
    if phase <= 0.5:
        return 1.0 - 4.0 * phase
    return 4.0 * phase - 3.0


def percussive_drive(dt_trig: float, spec: BehaviourSpec) -> float:
    """Force burst dt_trig seconds after a strike, in [-1, +1].

    Maximal rejection (+1) at the instant of the strike, then a triangular
    swing between rejection and attraction under a linear envelope that
    dies to exactly zero at t_decay.
    """
    if dt_trig < 0:
        raise ValueError(f"percussive_drive needs dt_trig >= 0, got {dt_trig}")
    if dt_trig >= spec.t_decay:
        return 0.0
    env = 1.0 - dt_trig / spec.t_decay
    return env * triangle_from_peak(spec.f_mod * dt_trig)


def synth_percussive(dt_trig: float, spec: BehaviourSpec) -> float:
    """Sound sample dt_trig seconds after a strike: decaying low sine."""
    if dt_trig < 0:
        raise ValueError(f"synth_percussive needs dt_trig >= 0, got {dt_trig}")
    return (spec.amp_sound * math.exp(-dt_trig / spec.tau_sound)
            * math.sin(2.0 * math.pi * spec.f_sound * dt_trig))


def render_sound(event: SoundEvent, duration_s: float | None = None,
                 rate_hz: int = AUDIO_RATE_HZ) -> list[float]:
    """Render a strike's sound to samples (duration defaults to 5*tau)."""
    spec = BehaviourSpec(f_sound=event.f_sound, tau_sound=event.tau_sound,
                         amp_sound=event.amp_sound)
    if duration_s is None:
        duration_s = 5.0 * event.tau_sound
    n = round(duration_s * rate_hz)
    return [synth_percussive(i / rate_hz, spec) for i in range(n)]


def behaviour_drive(state: BehaviourState, t_now: float, spec: BehaviourSpec) -> float:
    """Drive signal the behaviour feeds the output stage at time t_now.

    The active burst if a strike is in flight, exactly 0 when idle.
    """
    if state.last_trigger_t is None:
        return 0.0
    dt_trig = t_now - state.last_trigger_t
    if dt_trig < 0 or dt_trig >= spec.t_decay:
        return 0.0
    return percussive_drive(dt_trig, spec)
