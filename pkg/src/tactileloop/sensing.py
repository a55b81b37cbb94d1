"""Light-occlusion proximity sensing.

The magnet above the device blocks ambient light falling on a photo
sensor; distance is read from how dark it gets.  The pipeline is

    light level -> 7-bit code at 100 Hz -> running-extrema calibration
    -> normalized proximity with a 5% detection threshold.

Occlusion model: light drops linearly from full ambient (magnet out of
range) to ``ambient * floor_frac`` (magnet touching), i.e.

    x(z, t) = ambient(t) * (floor_frac + (1 - floor_frac) * clamp(z/z_max))
    ambient(t) = ambient * (1 + flicker_amp * sin(2*pi*50*t))

Linear occlusion keeps the resolution analysis transparent; the defaults
are tuned so the noiseless step census over the full range lands on 105
distinct detected codes.

Calibration uses only the range of codes actually seen: one full movement
towards the sensor after startup spans it.  Extrema never decay.  The 5%
threshold keeps slow ambient drift (passing clouds) from reading as an
approaching object.  A backup sampling path averages the light over one
20 ms mains period before quantizing, nulling 50 Hz lamp flicker at the
cost of sensitivity.

Noise is uniform in code units and derived from a counter hash of
(seed, sample index), so every frame is a pure function of its inputs:
replays are bit-identical with no RNG state to carry around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_Z_MAX_M = 0.04   # typical sensing range straight above the device
FLICKER_HZ = 50.0        # mains lamp flicker

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class LightModel:
    """Environment light reaching the sensor.

    ambient : normalized intensity with the magnet absent, in (0, 1].
        Below 1 because real rooms never saturate the sensor; the default
        0.92 puts the noiseless step census at 105.
    floor_frac : fraction of ambient still leaking in at full occlusion.
    flicker_amp : fractional depth of 50 Hz lamp flicker, [0, 1).
    noise_amp : uniform quantizer dither amplitude in code units.
    seed : keys the deterministic noise stream.
    """

    ambient: float = 0.92
    floor_frac: float = 0.06
    flicker_amp: float = 0.0
    flicker_hz: float = FLICKER_HZ
    noise_amp: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.ambient <= 1.0:
            raise ValueError(f"light.ambient must be in (0, 1], got {self.ambient!r}")
        if not 0.0 <= self.floor_frac < 1.0:
            raise ValueError(f"light.floor_frac must be in [0, 1), got {self.floor_frac!r}")
        if not 0.0 <= self.flicker_amp < 1.0:
            raise ValueError(f"light.flicker_amp must be in [0, 1), got {self.flicker_amp!r}")
        if self.flicker_hz <= 0:
            raise ValueError(f"light.flicker_hz must be positive, got {self.flicker_hz!r}")
        if self.noise_amp < 0:
            raise ValueError(f"light.noise_amp must be >= 0, got {self.noise_amp!r}")


@dataclass(frozen=True)
class SensorConfig:
    """Sampling geometry of the input path: 7 bits at 100 Hz over 0-4 cm."""

    bits: int = 7
    rate_hz: int = 100
    threshold: float = 0.05
    z_max: float = DEFAULT_Z_MAX_M
    backup_window_s: float = 0.020  # one 50 Hz mains period

    @property
    def code_max(self) -> int:
        return (1 << self.bits) - 1

    def validate(self) -> None:
        if self.bits != 7:
            raise ValueError(f"sensor.bits must be 7, got {self.bits!r}")
        if self.rate_hz <= 0:
            raise ValueError(f"sensor.rate_hz must be positive, got {self.rate_hz!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"sensor.threshold must be in (0, 1), got {self.threshold!r}")
        if self.z_max <= 0:
            raise ValueError(f"sensor.z_max must be positive, got {self.z_max!r}")
        if self.backup_window_s <= 0:
            raise ValueError(
                f"sensor.backup_window_s must be positive, got {self.backup_window_s!r}")


@dataclass
class CalibrationState:
    """Running extrema of the codes seen since startup.

    The sensor adapts to whatever lighting it finds by using only the
    range of values actually coming in; a full movement towards the
    sensor after switching on spans it.  Extrema never decay.
    """

    min_code: int = 0
    max_code: int = 0
    sample_count: int = 0

    MIN_SPAN = 8  # codes; below this the range is too thin to trust

    @property
    def calibrated(self) -> bool:
        return self.sample_count >= 1 and (self.max_code - self.min_code) >= self.MIN_SPAN


def calibrate_update(cal: CalibrationState, raw_code: int) -> None:
    """Ingest one code into the running extrema (in place)."""
    if cal.sample_count == 0:
        cal.min_code = raw_code
        cal.max_code = raw_code
    else:
        if raw_code < cal.min_code:
            cal.min_code = raw_code
        if raw_code > cal.max_code:
            cal.max_code = raw_code
    cal.sample_count += 1


@dataclass(frozen=True)
class SensorFrame:
    """One 100 Hz sample: raw code, calibrated proximity, detection flag.

    proximity is 0 exactly whenever detected is False; 1 means touching.
    """

    t: float
    raw_code: int
    proximity: float
    detected: bool


def round_half_up(x: float) -> int:
    """Round with ties away from the floor; one bit-exact rule used everywhere."""
    return math.floor(x + 0.5)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def noise_at(model: LightModel, sample_index: int) -> float:
    """Deterministic uniform dither in [-noise_amp, +noise_amp] code units.

    Counter-based: hashing (seed, index) instead of iterating an RNG keeps
    every sample reproducible in isolation.
    """
    if model.noise_amp == 0.0:
        return 0.0
    h = _splitmix64(_splitmix64(model.seed & _MASK64) ^ (sample_index & _MASK64))
    unit = h / float(1 << 64)  # [0, 1)
    return model.noise_amp * (2.0 * unit - 1.0)


def light_at_sensor(model: LightModel, z: float, t: float,
                    z_max: float = DEFAULT_Z_MAX_M) -> float:
    """Normalized light intensity at the sensor for magnet distance z.

    Monotone nondecreasing in z; saturates at ambient(t) once the magnet
    leaves the sensing range.
    """
    occlusion = model.floor_frac + (1.0 - model.floor_frac) * min(1.0, max(0.0, z / z_max))
    ambient_t = model.ambient
    if model.flicker_amp > 0.0:
        ambient_t *= 1.0 + model.flicker_amp * math.sin(2.0 * math.pi * model.flicker_hz * t)
    return ambient_t * occlusion


def quantize7(x: float, noise: float = 0.0) -> int:
    """Quantize intensity [0, 1] to a 7-bit code, dither added pre-clamp."""
    return min(127, max(0, round_half_up(127.0 * x + noise)))


def proximity_of(cal: CalibrationState, raw_code: int,
                 cfg: SensorConfig) -> tuple[float, bool]:
    """Normalized proximity from a code against the calibrated range.

    Returns (proximity, detected).  Below the detection threshold the
    proximity reads exactly 0, so slow ambient fluctuations never look
    like an object closing in.  An uncalibrated state yields (0, False).
    """
    if not cal.calibrated:
        return 0.0, False
    span = cal.max_code - cal.min_code
    p_raw = (cal.max_code - raw_code) / span
    p_raw = min(1.0, max(0.0, p_raw))
    if p_raw >= cfg.threshold:
        return p_raw, True
    return 0.0, False


def _sample_index(t: float, rate_hz: int) -> int:
    return round_half_up(t * rate_hz)


def sample_main(model: LightModel, z: float, t: float, cal: CalibrationState,
                cfg: SensorConfig) -> SensorFrame:
    """Take one main-path sample: light -> code -> calibration -> proximity.

    Updates the calibration extrema as a side effect of ingesting the code.
    """
    x = light_at_sensor(model, z, t, cfg.z_max)
    code = quantize7(x, noise_at(model, _sample_index(t, cfg.rate_hz)))
    calibrate_update(cal, code)
    proximity, detected = proximity_of(cal, code, cfg)
    return SensorFrame(t=t, raw_code=code, proximity=proximity, detected=detected)


def sample_backup(model: LightModel, z: float, t: float, cfg: SensorConfig) -> int:
    """Low-sensitivity backup code: light averaged over one mains period.

    The mean of the flicker term over [t - w, t] with w = backup_window_s
    has the closed form

        1 + flicker_amp * (cos(2*pi*f*(t-w)) - cos(2*pi*f*t)) / (2*pi*f*w)

    which vanishes to exactly 1 when w equals a whole flicker period, so
    50 Hz lamp modulation drops out of the code.  z is held at its value
    at the sample instant; only the light is integrated.
    """
    occlusion = model.floor_frac + (1.0 - model.floor_frac) * min(1.0, max(0.0, z / cfg.z_max))
    mean_flicker = 1.0
    if model.flicker_amp > 0.0:
        w = cfg.backup_window_s
        two_pi_f = 2.0 * math.pi * model.flicker_hz
        mean_flicker = 1.0 + model.flicker_amp * (
            math.cos(two_pi_f * (t - w)) - math.cos(two_pi_f * t)) / (two_pi_f * w)
    x = model.ambient * mean_flicker * occlusion
    return quantize7(x, noise_at(model, _sample_index(t, cfg.rate_hz)))


def effective_steps(model: LightModel, cfg: SensorConfig,
                    sweep_step_m: float = 1e-5) -> int:
    """Count distinct detected codes over an exhaustive noiseless sweep.

    First runs the startup calibration gesture (full movement towards the
    sensor), then sweeps z from 0 to z_max at sweep_step_m resolution and
    counts the distinct codes that pass the detection threshold.  Flicker
    and noise are left out: this is the good-lighting resolution census.
    """
    n = round(cfg.z_max / sweep_step_m)
    grid = [i * sweep_step_m for i in range(n + 1)]

    cal = CalibrationState()
    for z in reversed(grid):  # approach: z_max -> 0
        calibrate_update(cal, quantize7(light_at_sensor(model, z, 0.0, cfg.z_max)))

    codes: set[int] = set()
    for z in grid:
        code = quantize7(light_at_sensor(model, z, 0.0, cfg.z_max))
        _, detected = proximity_of(cal, code, cfg)
        if detected:
            codes.add(code)
    return len(codes)
