"""Radar configuration, derived constants and a synthetic FMCW IF-signal generator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

C0 = 299_792_458.0


class GestureClass(enum.IntEnum):
    BACKGROUND = 0
    SWIPE_LEFT = 1
    SWIPE_RIGHT = 2
    SWIPE_UP = 3
    SWIPE_DOWN = 4
    PUSH = 5

    @property
    def is_swipe(self) -> bool:
        return self in (GestureClass.SWIPE_LEFT, GestureClass.SWIPE_RIGHT,
                        GestureClass.SWIPE_UP, GestureClass.SWIPE_DOWN)


GESTURES = tuple(g for g in GestureClass if g is not GestureClass.BACKGROUND)


@dataclass(frozen=True)
class RadarConfig:
    f_min: float = 58.5e9
    f_max: float = 62.5e9
    f_center: float = 60.5e9
    bandwidth: float = 4e9
    n_samples: int = 64
    n_chirps: int = 32
    n_frames: int = 100
    t_chirp: float = 0.3e-3
    t_frame: float = 30e-3
    f_sample: float = 2e6
    n_antennas: int = 3
    antenna_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if not math.isclose(self.bandwidth, self.f_max - self.f_min, rel_tol=1e-9):
            raise ValueError("bandwidth must equal f_max - f_min")
        if not math.isclose(self.f_center, 0.5 * (self.f_min + self.f_max), rel_tol=1e-9):
            raise ValueError("f_center must be the midpoint of f_min and f_max")
        if self.bandwidth <= 0 or self.t_chirp <= 0 or self.f_sample <= 0:
            raise ValueError("bandwidth, t_chirp and f_sample must be positive")
        for name in ("n_samples", "n_chirps", "n_frames", "n_antennas"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_samples & (self.n_samples - 1):
            raise ValueError("n_samples must be a power of two")
        if self.antenna_spacing_wavelengths <= 0:
            raise ValueError("antenna spacing must be positive")

    @classmethod
    def from_band(cls, f_min: float, f_max: float, **kw) -> "RadarConfig":
        return cls(f_min=f_min, f_max=f_max, f_center=0.5 * (f_min + f_max),
                   bandwidth=f_max - f_min, **kw)

    def replace(self, **kw) -> "RadarConfig":
        return replace(self, **kw)


def range_resolution(cfg: RadarConfig) -> float:
    return C0 / (2.0 * cfg.bandwidth)


def max_range(cfg: RadarConfig) -> float:
    return range_resolution(cfg) * cfg.n_samples / 2


def max_velocity(cfg: RadarConfig) -> float:
    return C0 / (4.0 * cfg.f_center * cfg.t_chirp)


def doppler_phase_step(cfg: RadarConfig, velocity: float) -> float:
    """Phase advance between consecutive chirps for a given radial velocity."""
    return 4.0 * math.pi * cfg.f_center * velocity * cfg.t_chirp / C0


@dataclass(frozen=True)
class TargetState:
    range: float
    radial_velocity: float = 0.0
    azimuth: float = 0.0
    elevation: float = 0.0
    amplitude: float = 1.0

    def as_tuple(self) -> tuple:
        return (self.range, self.radial_velocity, self.azimuth, self.elevation, self.amplitude)


@dataclass
class Recording:
    samples: np.ndarray  # [antenna][frame][chirp][sample]
    label: GestureClass
    ground_truth: Optional[list] = None  # per frame: TargetState or None

    def __post_init__(self):
        self.label = GestureClass(self.label)
        if self.samples.ndim != 4:
            raise ValueError(f"samples must be 4-D, got shape {self.samples.shape}")
        if self.ground_truth is not None and len(self.ground_truth) != self.samples.shape[1]:
            raise ValueError("ground_truth length must equal n_frames")

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    def frame(self, index: int) -> np.ndarray:
        return self.samples[:, index]

    def frames(self) -> np.ndarray:
        """All frames as [frame][antenna][chirp][sample]."""
        return np.moveaxis(self.samples, 1, 0)


def _check_target(cfg: RadarConfig, t: TargetState):
    if not all(math.isfinite(v) for v in t.as_tuple()):
        raise ValueError(f"non-finite target parameters: {t}")
    if not 0.0 <= t.range <= max_range(cfg) * (1 + 1e-12):
        raise ValueError(f"target range {t.range} outside [0, R_max]")
    if abs(t.radial_velocity) > max_velocity(cfg) * (1 + 1e-12):
        raise ValueError(f"radial velocity {t.radial_velocity} exceeds V_max")
    if abs(t.azimuth) > math.pi / 2 or abs(t.elevation) > math.pi / 2:
        raise ValueError("angles must lie within [-pi/2, pi/2]")
    if t.amplitude < 0:
        raise ValueError("amplitude must be >= 0")


def antenna_phases(cfg: RadarConfig, azimuth: float, elevation: float) -> np.ndarray:
    """Per-antenna phase offsets of the L-shaped receive array (Rx1 is the reference)."""
    k = 2.0 * math.pi * cfg.antenna_spacing_wavelengths
    sa, se = math.sin(azimuth), math.sin(elevation)
    phases = np.zeros(cfg.n_antennas)
    if cfg.n_antennas > 1:
        phases[1] = k * (sa - se)
    if cfg.n_antennas > 2:
        phases[2] = k * sa
    return phases


def synth_frame(cfg: RadarConfig, targets: Sequence[TargetState], noise_std: float = 0.0,
                rng=None) -> np.ndarray:
    """Real-valued IF samples of one frame, shape [antenna][chirp][sample].

    Each point target contributes a cosine at its beat frequency with a
    per-chirp Doppler phase, a per-antenna arrival phase and a round-trip
    carrier phase.
    """
    if not math.isfinite(noise_std) or noise_std < 0:
        raise ValueError("noise_std must be finite and >= 0")
    n = np.arange(cfg.n_samples)
    c = np.arange(cfg.n_chirps)
    out = np.zeros((cfg.n_antennas, cfg.n_chirps, cfg.n_samples))
    r_res = range_resolution(cfg)
    for t in targets:
        _check_target(cfg, t)
        beat = 2.0 * math.pi * (t.range / r_res) * n / cfg.n_samples
        dopp = c * doppler_phase_step(cfg, t.radial_velocity)
        carrier = 4.0 * math.pi * cfg.f_center * t.range / C0
        ant = antenna_phases(cfg, t.azimuth, t.elevation)
        phase = ant[:, None, None] + dopp[None, :, None] + beat[None, None, :] + carrier
        out += t.amplitude * np.cos(phase)
    if noise_std > 0:
        out += np.random.default_rng(rng).normal(0.0, noise_std, out.shape)
    return out


@dataclass(frozen=True)
class GestureParams:
    """Trajectory template for one synthetic gesture.

    Ranges in meters, angles in radians. ``start_frame=None`` draws the
    window start from the recording seed.
    """

    window_frames: int = 25
    start_frame: Optional[int] = None
    hand_range: float = 0.35
    approach_depth: float = 0.15
    push_depth: float = 0.30
    retract_depth: float = 0.06
    retract_fraction: float = 0.25
    sweep_angle: float = 0.6
    azimuth_offset: float = 0.0
    elevation_offset: float = 0.0
    amplitude_scale: float = 1.0
    reference_range: float = 0.3
    noise_std: float = 0.05
    body_range: Optional[float] = 0.9

    def validate(self, cfg: RadarConfig):
        if not 2 <= self.window_frames <= cfg.n_frames:
            raise ValueError("window_frames must lie in [2, n_frames]")
        if self.start_frame is not None and not (
                0 <= self.start_frame <= cfg.n_frames - self.window_frames):
            raise ValueError("start_frame leaves the gesture window outside the recording")
        r_max = max_range(cfg)
        if self.hand_range <= 0:
            raise ValueError("hand_range must be > 0")
        if min(self.approach_depth, self.push_depth, self.retract_depth) < 0:
            raise ValueError("trajectory depths must be >= 0")
        if self.hand_range + max(self.approach_depth, self.push_depth, self.retract_depth) > r_max:
            raise ValueError("trajectory leaves the unambiguous range")
        if not 0 < self.retract_fraction < 1:
            raise ValueError("retract_fraction must lie in (0, 1)")
        if self.body_range is not None and not self.hand_range < self.body_range <= r_max:
            raise ValueError("body must sit behind the hand and within R_max")
        lim = math.pi / 2
        if abs(self.sweep_angle) + max(abs(self.azimuth_offset), abs(self.elevation_offset)) > lim:
            raise ValueError("angles exceed +-pi/2")
        if self.noise_std < 0 or self.amplitude_scale < 0 or self.reference_range <= 0:
            raise ValueError("noise_std, amplitude_scale must be >= 0 and reference_range > 0")


def random_gesture_params(rng: np.random.Generator, noise_std: float = 0.05) -> GestureParams:
    """Jittered template so recordings of one class are not identical."""
    return GestureParams(
        hand_range=rng.uniform(0.22, 0.45),
        approach_depth=rng.uniform(0.10, 0.20),
        push_depth=rng.uniform(0.22, 0.35),
        retract_depth=rng.uniform(0.03, 0.08),
        sweep_angle=rng.uniform(0.4, 0.8),
        azimuth_offset=rng.uniform(-0.15, 0.15),
        elevation_offset=rng.uniform(-0.15, 0.15),
        amplitude_scale=rng.uniform(0.7, 1.3),
        noise_std=noise_std,
        body_range=rng.uniform(0.85, 1.15),
    )


def _amplitude(p: GestureParams, rng_: float) -> float:
    return p.amplitude_scale * (p.reference_range / rng_) ** 2


def gesture_trajectory(cfg: RadarConfig, kind: GestureClass, p: GestureParams) -> list:
    """Hand states for each frame of the gesture window."""
    kind = GestureClass(kind)
    n = p.window_frames
    u = np.linspace(0.0, 1.0, n)
    tf = cfg.t_frame
    az = np.full(n, p.azimuth_offset)
    el = np.full(n, p.elevation_offset)
    if kind is GestureClass.PUSH:
        n_app = max(2, min(n - 1, round((1 - p.retract_fraction) * n)))
        n_ret = n - n_app
        j = np.arange(n)
        r = np.where(j < n_app,
                     p.hand_range + p.push_depth * (1 - j / (n_app - 1)),
                     p.hand_range + p.retract_depth * (j - n_app + 1) / n_ret)
        v = np.where(j < n_app, -p.push_depth / ((n_app - 1) * tf), p.retract_depth / (n_ret * tf))
    elif kind.is_swipe:
        r = p.hand_range + p.approach_depth * np.abs(2 * u - 1)
        speed = 2 * p.approach_depth / ((n - 1) * tf)
        v = np.where(u < 0.5, -speed, speed)
        sweep = p.sweep_angle * (2 * u - 1)
        if kind is GestureClass.SWIPE_LEFT:
            az = p.azimuth_offset - sweep
        elif kind is GestureClass.SWIPE_RIGHT:
            az = p.azimuth_offset + sweep
        elif kind is GestureClass.SWIPE_UP:
            el = p.elevation_offset + sweep
        else:
            el = p.elevation_offset - sweep
    else:
        raise ValueError(f"no trajectory template for {kind!r}")
    v = np.clip(v, -max_velocity(cfg), max_velocity(cfg))
    return [TargetState(float(r[i]), float(v[i]), float(az[i]), float(el[i]),
                        _amplitude(p, float(r[i]))) for i in range(n)]


def synth_gesture_recording(cfg: RadarConfig, kind: GestureClass, params: Optional[GestureParams] = None,
                            seed: int = 0) -> Recording:
    """One recording with a hand gesture (or noise only for BACKGROUND).

    Deterministic in (cfg, params, seed). Samples are float32, as stored
    in the dataset container.
    """
    kind = GestureClass(kind)
    p = params or GestureParams()
    p.validate(cfg)
    rng = np.random.default_rng(seed)
    start = p.start_frame
    if start is None:
        start = int(rng.integers(0, cfg.n_frames - p.window_frames + 1))
    hand = [None] * cfg.n_frames
    if kind is not GestureClass.BACKGROUND:
        for i, state in enumerate(gesture_trajectory(cfg, kind, p)):
            hand[start + i] = state
    body = None
    if p.body_range is not None:
        body = TargetState(p.body_range, 0.0, 0.0, 0.0, _amplitude(p, p.body_range))
    frames = np.empty((cfg.n_frames, cfg.n_antennas, cfg.n_chirps, cfg.n_samples))
    for f in range(cfg.n_frames):
        targets = [t for t in (hand[f], body) if t is not None]
        frames[f] = synth_frame(cfg, targets, p.noise_std, rng)
    samples = np.ascontiguousarray(np.moveaxis(frames, 0, 1), dtype=np.float32)
    return Recording(samples, kind, hand)
