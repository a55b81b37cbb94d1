"""Deterministic fixed-step sessions closing the tactile loop.

One master clock at the physics rate (4 kHz by default) drives everything;
the 100 Hz sensor and 200 Hz actuator fire on integer divisors of it, so
there is no jitter and no rate drift.  On a tick where both fall due, the
sensor runs first: the behaviour engine sees the freshest proximity at the
instant it decides to strike.

Per physics tick:

    sensor due?   -> sample light, update calibration, proximity,
                     trigger detection (may emit a SoundEvent)
    actuator due? -> evaluate the behaviour drive at this instant,
                     quantize to 26 levels, hold the result
    always        -> advance the magnet one dt under the held drive and
                     the scripted hand target

Sessions record every stream into a SessionTrace; identical configs give
bit-identical traces, and the CSV export round-trips exactly (floats are
written with shortest round-trip repr).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

from .actuation import ActuatorConfig, quantize26
from .behaviour import BehaviourSpec, BehaviourState, SoundEvent, behaviour_drive, detect_trigger
from .physics import (HandTarget, MagnetState, PhysicsConfig, drive_to_current,
                      net_force, step)
from .sensing import (CalibrationState, LightModel, SensorConfig, calibrate_update,
                      light_at_sensor, quantize7, sample_main)


class ConfigError(ValueError):
    """A session configuration field is missing, malformed, or inconsistent."""


TRAJECTORY_PRESETS: dict[str, tuple[tuple[float, float], ...]] = {
    # A strike: fast approach to just above the coil, hold, retreat.
    # 150 ms approach = ~15 sensor samples, percussive at 100 Hz.
    "percussive_strike": ((0.0, 0.04), (0.15, 0.005), (1.15, 0.005), (1.40, 0.04)),
    # Startup calibration gesture: one full movement towards the sensor.
    "calibration_sweep": ((0.0, 0.04), (0.5, 0.0), (1.0, 0.04)),
}


@dataclass(frozen=True)
class Trajectory:
    """Scripted hand intention: piecewise-linear (t, z_target) keyframes."""

    keyframes: tuple[tuple[float, float], ...]
    preset: str | None = None

    @classmethod
    def from_preset(cls, name: str) -> "Trajectory":
        if name not in TRAJECTORY_PRESETS:
            raise ConfigError(
                f"trajectory.preset unknown: {name!r} (have {sorted(TRAJECTORY_PRESETS)})")
        return cls(keyframes=TRAJECTORY_PRESETS[name], preset=name)

    def validate(self) -> None:
        if not self.keyframes:
            raise ConfigError("trajectory.keyframes must not be empty")
        for (t0, z0), (t1, _) in zip(self.keyframes, self.keyframes[1:]):
            if t1 <= t0:
                raise ConfigError(
                    f"trajectory.keyframes times must strictly increase, got {t0} then {t1}")
        for t, z in self.keyframes:
            if z < 0:
                raise ConfigError(f"trajectory z_target must be >= 0, got {z} at t={t}")

    def target_at(self, t: float) -> HandTarget:
        """Interpolated hand target; constant (v = 0) outside the keyframes."""
        kf = self.keyframes
        if t <= kf[0][0]:
            return HandTarget(z_target=kf[0][1], v_target=0.0)
        if t >= kf[-1][0]:
            return HandTarget(z_target=kf[-1][1], v_target=0.0)
        for (t0, z0), (t1, z1) in zip(kf, kf[1:]):
            if t0 <= t < t1:
                slope = (z1 - z0) / (t1 - t0)
                return HandTarget(z_target=z0 + slope * (t - t0), v_target=slope)
        return HandTarget(z_target=kf[-1][1], v_target=0.0)


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs; all sub-configs carry their defaults."""

    duration_s: float = 2.0
    seed: int = 0
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    light: LightModel = field(default_factory=LightModel)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    actuator: ActuatorConfig = field(default_factory=ActuatorConfig)
    behaviour: BehaviourSpec = field(default_factory=BehaviourSpec)
    trajectory: Trajectory = field(
        default_factory=lambda: Trajectory.from_preset("percussive_strike"))

    @property
    def physics_rate_hz(self) -> int:
        return round(1.0 / self.physics.dt)

    def validate(self) -> None:
        if self.duration_s < 0:
            raise ConfigError(f"duration_s must be >= 0, got {self.duration_s!r}")
        try:
            self.physics.validate()
            self.light.validate()
            self.sensor.validate()
            self.actuator.validate()
            self.behaviour.validate(self.actuator.control_rate_hz)
            self.trajectory.validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rate = self.physics_rate_hz
        if abs(rate * self.physics.dt - 1.0) > 1e-9:
            raise ConfigError(
                f"physics.dt must divide one second evenly, got {self.physics.dt!r}")
        for name, sub_rate in (("sensor.rate_hz", self.sensor.rate_hz),
                               ("actuator.rate_hz", self.actuator.rate_hz)):
            if rate % sub_rate != 0:
                raise ConfigError(
                    f"{name} must divide the physics rate {rate}, got {sub_rate}")
        if self.physics.dt > 1.0 / (2 * self.actuator.rate_hz):
            raise ConfigError(
                f"physics.dt must be <= 1/(2*actuator.rate_hz), got {self.physics.dt!r}")


class SensorRow(NamedTuple):
    t: float
    raw_code: int
    proximity: float
    detected: bool
    trigger_fired: bool


class ActuatorRow(NamedTuple):
    t: float
    level: int
    u_q: float
    current: float


class PhysicsRow(NamedTuple):
    t: float
    z: float
    v: float
    force: float


@dataclass
class SessionTrace:
    """Time-aligned record of every loop signal, one list per stream."""

    sensor_rows: list[SensorRow]
    actuator_rows: list[ActuatorRow]
    physics_rows: list[PhysicsRow]
    sound_events: list[SoundEvent]
    meta: SessionConfig

    @property
    def trigger_count(self) -> int:
        return sum(1 for row in self.sensor_rows if row.trigger_fired)


class TickOutput(NamedTuple):
    """What one physics tick produced (None where nothing was due)."""

    sensor: SensorRow | None
    actuator: ActuatorRow | None
    physics: PhysicsRow
    sound: SoundEvent | None


class ClosedLoop:
    """The loop advanced one physics tick at a time.

    Offline sessions feed it targets from a scripted trajectory; the live
    server feeds it targets held from control messages.  Both paths run
    the identical tick, which is what makes live runs replayable offline.

    A session models an already set-up device: the startup gesture (one
    full movement towards the sensor) is assumed done, so the calibration
    extrema are seeded over the reachable range before the first tick.
    Without this the opening strike would double as the calibration
    movement and proximity would pin at 1.0 while the range grows.
    """

    def __init__(self, cfg: SessionConfig):
        cfg.validate()
        self.cfg = cfg
        rate = cfg.physics_rate_hz
        self.ticks_per_sensor = rate // cfg.sensor.rate_hz
        self.ticks_per_actuator = rate // cfg.actuator.rate_hz
        start = cfg.trajectory.target_at(0.0)
        self.state = MagnetState(z=max(start.z_target, cfg.physics.z_floor), v=0.0, t=0.0)
        self.cal = CalibrationState()
        self._seed_calibration()
        self.behaviour_state = BehaviourState()
        self.behaviour_spec = cfg.behaviour
        self.tick_index = 0
        self.held_u_q = 0.0
        self.held_level = 0
        self._p_prev = 0.0

    def _seed_calibration(self, step_m: float = 1e-4) -> None:
        """Ingest the startup sweep: z_floor (the stop) up to z_max, noiseless."""
        cfg = self.cfg
        n = round((cfg.sensor.z_max - cfg.physics.z_floor) / step_m)
        for i in range(n + 1):
            z = cfg.physics.z_floor + i * step_m
            calibrate_update(self.cal, quantize7(light_at_sensor(
                cfg.light, z, 0.0, cfg.sensor.z_max)))

    @property
    def t(self) -> float:
        return self.tick_index * self.cfg.physics.dt

    def reset_calibration(self) -> None:
        """Forget the learned range; the next full movement re-calibrates."""
        self.cal = CalibrationState()

    def tick(self, target: HandTarget) -> TickOutput:
        """Advance exactly one physics dt; sensor before actuator when due."""
        cfg = self.cfg
        t = self.tick_index * cfg.physics.dt

        sensor_row = None
        sound = None
        if self.tick_index % self.ticks_per_sensor == 0:
            frame = sample_main(cfg.light, self.state.z, t, self.cal, cfg.sensor)
            fired = detect_trigger(self._p_prev, frame.proximity, t,
                                   self.behaviour_spec, self.behaviour_state)
            self._p_prev = frame.proximity
            if fired:
                spec = self.behaviour_spec
                sound = SoundEvent(t=t, f_sound=spec.f_sound,
                                   tau_sound=spec.tau_sound, amp_sound=spec.amp_sound)
            sensor_row = SensorRow(t=t, raw_code=frame.raw_code, proximity=frame.proximity,
                                   detected=frame.detected, trigger_fired=fired)

        actuator_row = None
        if self.tick_index % self.ticks_per_actuator == 0:
            u = behaviour_drive(self.behaviour_state, t, self.behaviour_spec)
            self.held_level, self.held_u_q = quantize26(u)
            actuator_row = ActuatorRow(t=t, level=self.held_level, u_q=self.held_u_q,
                                       current=drive_to_current(self.held_u_q,
                                                                cfg.actuator.i_max))

        force = net_force(self.state, self.held_u_q, target, cfg.physics)
        physics_row = PhysicsRow(t=t, z=self.state.z, v=self.state.v, force=force)
        self.state = step(self.state, self.held_u_q, target, cfg.physics)
        self.tick_index += 1
        return TickOutput(sensor=sensor_row, actuator=actuator_row,
                          physics=physics_row, sound=sound)


def run_session(cfg: SessionConfig) -> SessionTrace:
    """Run the whole configured session offline and record every stream."""
    loop = ClosedLoop(cfg)
    n_ticks = round(cfg.duration_s * cfg.physics_rate_hz)
    trace = SessionTrace(sensor_rows=[], actuator_rows=[], physics_rows=[],
                         sound_events=[], meta=cfg)
    for k in range(n_ticks):
        out = loop.tick(cfg.trajectory.target_at(k * cfg.physics.dt))
        if out.sensor is not None:
            trace.sensor_rows.append(out.sensor)
        if out.actuator is not None:
            trace.actuator_rows.append(out.actuator)
        trace.physics_rows.append(out.physics)
        if out.sound is not None:
            trace.sound_events.append(out.sound)
    return trace


# --------------------------------------------------------------------------
# Coupling metric: do actuator bursts show up in the sensed proximity?
# --------------------------------------------------------------------------

COUPLING_MAX_LAG_S = 0.050


def _pearson(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    if n < 2:
        return 0.0
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        return 0.0  # a constant stream carries no coupling information
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def coupling_score(trace: SessionTrace) -> float | None:
    """How strongly the actuator bursts reflect into the proximity input.

    Maximum over lags in [0, 50 ms] of the Pearson correlation between the
    actuator drive (hold-resampled onto the sensor clock) and the first
    difference of the proximity stream, over the active-burst window after
    the first trigger.  Returns None when the trace holds no trigger (the
    metric is then undefined); a constant drive scores 0.

    Two guards keep the metric about reflection rather than artifacts:

    - proximity differences within 1.5 quantization steps (step estimated
      from the stream itself) are treated as 0: a hand that barely moves
      only flips codes through the dither, and those flips are sensor
      noise, not reflected force;
    - difference samples taken while the commanded hand target was still
      moving are excluded: the trigger fires mid-gesture by construction,
      and the gesture's own proximity slope says nothing about coupling.
    """
    if not trace.sound_events:
        return None
    meta = trace.meta
    t_trig = trace.sound_events[0].t
    t_end = t_trig + meta.behaviour.t_decay

    sensor = trace.sensor_rows
    # Hold-resample the actuator drive onto the sensor instants.
    u_held: list[float] = []
    j = 0
    act = trace.actuator_rows
    for row in sensor:
        while j + 1 < len(act) and act[j + 1].t <= row.t:
            j += 1
        u_held.append(act[j].u_q if act and act[j].t <= row.t else 0.0)

    quantum = _proximity_quantum(sensor)
    dp = [0.0]
    dp_valid = [False]
    for i in range(1, len(sensor)):
        d = sensor[i].proximity - sensor[i - 1].proximity
        dp.append(0.0 if abs(d) <= 1.5 * quantum else d)
        moving = (meta.trajectory.target_at(sensor[i].t).v_target != 0.0
                  or meta.trajectory.target_at(sensor[i - 1].t).v_target != 0.0)
        dp_valid.append(not moving)

    window = [i for i, row in enumerate(sensor) if t_trig <= row.t <= t_end]
    if len(window) < 2:
        return None

    max_lag = math.floor(COUPLING_MAX_LAG_S * meta.sensor.rate_hz)
    best = 0.0
    for lag in range(max_lag + 1):
        pairs = [(u_held[i], dp[i + lag]) for i in window
                 if i + lag < len(sensor) and dp_valid[i + lag]]
        score = _pearson([p[0] for p in pairs], [p[1] for p in pairs])
        best = max(best, score)
    return best


def _proximity_quantum(sensor_rows: list[SensorRow]) -> float:
    """Smallest step the quantized proximity stream can take, estimated
    as the minimum positive gap between distinct observed values."""
    distinct = sorted({row.proximity for row in sensor_rows})
    gaps = [b - a for a, b in zip(distinct, distinct[1:]) if b - a > 1e-12]
    return min(gaps) if gaps else 0.0


# --------------------------------------------------------------------------
# Config <-> JSON document
# --------------------------------------------------------------------------

_SECTION_TYPES = {
    "physics": PhysicsConfig,
    "light": LightModel,
    "sensor": SensorConfig,
    "actuator": ActuatorConfig,
    "behaviour": BehaviourSpec,
}


def config_to_dict(cfg: SessionConfig) -> dict:
    doc = {
        "duration_s": cfg.duration_s,
        "seed": cfg.seed,
        "physics": asdict(cfg.physics),
        "light": asdict(cfg.light),
        "sensor": asdict(cfg.sensor),
        "actuator": asdict(cfg.actuator),
        "behaviour": asdict(cfg.behaviour),
    }
    if cfg.trajectory.preset is not None:
        doc["trajectory"] = {"preset": cfg.trajectory.preset}
    else:
        doc["trajectory"] = {"keyframes": [list(kf) for kf in cfg.trajectory.keyframes]}
    return doc


def config_from_dict(doc: dict, validate: bool = True) -> SessionConfig:
    """Build a SessionConfig from a plain JSON document.

    Unknown fields are rejected by name; a top-level seed flows into the
    light model unless the document pins light.seed itself.  Pass
    validate=False to build a config the self-checks can then judge.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"config document must be a JSON object, got {type(doc).__name__}")
    doc = dict(doc)
    kwargs: dict = {}
    if "duration_s" in doc:
        kwargs["duration_s"] = _expect_number(doc.pop("duration_s"), "duration_s")
    seed = doc.pop("seed", None)
    if seed is not None:
        if not isinstance(seed, int):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        kwargs["seed"] = seed

    for section, cls in _SECTION_TYPES.items():
        sub = doc.pop(section, None)
        if sub is None:
            sub = {}
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be a JSON object, got {sub!r}")
        sub = dict(sub)
        if section == "light" and seed is not None and "seed" not in sub:
            sub["seed"] = seed
        known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
        unknown = set(sub) - known
        if unknown:
            raise ConfigError(f"unknown field {section}.{sorted(unknown)[0]}")
        try:
            kwargs[section] = cls(**sub)
        except TypeError as exc:
            raise ConfigError(f"bad {section} section: {exc}") from exc

    traj = doc.pop("trajectory", None)
    if traj is not None:
        kwargs["trajectory"] = _trajectory_from_dict(traj)
    if doc:
        raise ConfigError(f"unknown field {sorted(doc)[0]}")
    cfg = SessionConfig(**kwargs)
    if validate:
        cfg.validate()
    return cfg


def _trajectory_from_dict(traj: dict) -> Trajectory:
    if not isinstance(traj, dict):
        raise ConfigError(f"trajectory must be a JSON object, got {traj!r}")
    if "preset" in traj and "keyframes" in traj:
        raise ConfigError("trajectory takes either preset or keyframes, not both")
    if "preset" in traj:
        return Trajectory.from_preset(traj["preset"])
    if "keyframes" in traj:
        kfs = traj["keyframes"]
        if not isinstance(kfs, list):
            raise ConfigError(f"trajectory.keyframes must be a list, got {kfs!r}")
        out = []
        for kf in kfs:
            if not (isinstance(kf, (list, tuple)) and len(kf) == 2):
                raise ConfigError(f"trajectory keyframe must be [t, z_target], got {kf!r}")
            out.append((float(kf[0]), float(kf[1])))
        return Trajectory(keyframes=tuple(out))
    raise ConfigError("trajectory needs a preset or keyframes")


def _expect_number(value, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


# --------------------------------------------------------------------------
# Trace export / import
# --------------------------------------------------------------------------

_STREAM_FILES = {
    "sensor": ("sensor.csv", SensorRow),
    "actuator": ("actuator.csv", ActuatorRow),
    "physics": ("physics.csv", PhysicsRow),
}
META_FILE = "meta.json"


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)  # shortest round-trip decimal
    return str(value)


def export_trace(trace: SessionTrace, out_dir: str) -> list[str]:
    """Write one CSV per stream plus a JSON meta file; returns the paths.

    Cells use '.' as decimal separator and floats round-trip exactly, so
    importing the files reproduces the trace bit for bit.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    streams = {"sensor": trace.sensor_rows, "actuator": trace.actuator_rows,
               "physics": trace.physics_rows}
    for name, (filename, row_type) in _STREAM_FILES.items():
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(",".join(row_type._fields) + "\n")
            for row in streams[name]:
                f.write(",".join(_format_cell(v) for v in row) + "\n")
        written.append(path)
    meta_path = os.path.join(out_dir, META_FILE)
    meta = {
        "config": config_to_dict(trace.meta),
        "sound_events": [asdict(ev) for ev in trace.sound_events],
    }
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    written.append(meta_path)
    return written


def import_trace(out_dir: str) -> SessionTrace:
    """Read back what export_trace wrote."""
    rows: dict[str, list] = {}
    casts = {
        "sensor": (float, int, float, _parse_bool, _parse_bool),
        "actuator": (float, int, float, float),
        "physics": (float, float, float, float),
    }
    for name, (filename, row_type) in _STREAM_FILES.items():
        path = os.path.join(out_dir, filename)
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split(",")
            if header != list(row_type._fields):
                raise ValueError(f"{path}: unexpected header {header}")
            parsed = []
            for line in f:
                cells = line.rstrip("\n").split(",")
                parsed.append(row_type(*(cast(c) for cast, c in zip(casts[name], cells))))
        rows[name] = parsed
    with open(os.path.join(out_dir, META_FILE), "r", encoding="utf-8") as f:
        meta = json.load(f)
    cfg = config_from_dict(meta["config"])
    events = [SoundEvent(**ev) for ev in meta["sound_events"]]
    return SessionTrace(sensor_rows=rows["sensor"], actuator_rows=rows["actuator"],
                        physics_rows=rows["physics"], sound_events=events, meta=cfg)


def _parse_bool(cell: str) -> bool:
    return cell == "1"
