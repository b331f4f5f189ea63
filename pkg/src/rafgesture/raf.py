"""Resonate-and-fire neuron bank for range-bin detection, gesture-frame search and frame labelling.

Each neuron is a damped complex oscillator tuned to one DFT bin of the
fast-time signal. Per step the state is rotated by the neuron's phase
increment, decayed by ``1 - alpha`` and the (gain-scaled) input sample is
added to the real part. A spike is an upward crossing of ``v_th`` by the
imaginary part; the state is not reset after a spike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dsp import preprocess_frames
from .radar import GestureClass, Recording

SWIPE_WINDOW = (4, 4)
PUSH_WINDOW = (5, 3)


@dataclass(frozen=True)
class RafConfig:
    n_neurons: int = 32
    alpha: float = 0.018
    v_th: float = 0.02
    n_detect_chirps: int = 3
    samples_per_chirp: int = 64
    # Drive gain; keeps off-resonance neurons below v_th for [0, 1]-scaled frames.
    input_gain: float = 0.0045
    prominence: float = 0.5
    antenna: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.v_th <= 0:
            raise ValueError("v_th must be positive")
        if self.n_neurons != self.samples_per_chirp // 2:
            raise ValueError("n_neurons must equal samples_per_chirp / 2")
        if self.n_detect_chirps < 1 or self.input_gain <= 0:
            raise ValueError("n_detect_chirps and input_gain must be positive")
        if not 0 < self.prominence <= 1:
            raise ValueError("prominence must lie in (0, 1]")

    @property
    def stream_length(self) -> int:
        return self.n_detect_chirps * self.samples_per_chirp

    def replace(self, **kw) -> "RafConfig":
        return replace(self, **kw)


@dataclass
class RafNeuronState:
    re: float = 0.0
    im: float = 0.0
    phase_increment: float = 0.0
    spike_count: int = 0
    first_spike_step: Optional[int] = None
    steps: int = 0

    @classmethod
    def for_bin(cls, k: int, n_samples: int = 64) -> "RafNeuronState":
        return cls(phase_increment=2 * math.pi * k / n_samples)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)


def raf_step(state: RafNeuronState, x: float, alpha: float, v_th: float,
             input_gain: float = RafConfig.input_gain) -> tuple:
    """Advance one neuron by one sample. Returns ``(new_state, spiked)``."""
    c, s = math.cos(state.phase_increment), math.sin(state.phase_increment)
    decay = 1.0 - alpha
    re = decay * (c * state.re - s * state.im) + input_gain * x
    im = decay * (s * state.re + c * state.im)
    spiked = im >= v_th and state.im < v_th
    new = RafNeuronState(re, im, state.phase_increment, state.spike_count + spiked,
                         state.first_spike_step, state.steps + 1)
    if spiked and new.first_spike_step is None:
        new.first_spike_step = state.steps
    return new, spiked


def run_bank(streams: np.ndarray, cfg: RafConfig, n_samples: Optional[int] = None) -> tuple:
    """Run all neurons from zero state over one or many input streams.

    ``streams`` has shape [..., T]. Returns ``(spike_counts, first_spike)``
    of shape [..., n_neurons]; ``first_spike`` is -1 where a neuron never fired.
    """
    x = np.asarray(streams, dtype=np.float64)
    n_samples = n_samples or cfg.samples_per_chirp
    omega = 2 * np.pi * np.arange(cfg.n_neurons) / n_samples
    rot = (1.0 - cfg.alpha) * np.exp(1j * omega)
    lead = x.shape[:-1]
    z = np.zeros(lead + (cfg.n_neurons,), dtype=np.complex128)
    counts = np.zeros(lead + (cfg.n_neurons,), dtype=np.int64)
    first = np.full(lead + (cfg.n_neurons,), -1, dtype=np.int64)
    drive = cfg.input_gain * x
    for t in range(x.shape[-1]):
        prev_im = z.imag
        z = rot * z + drive[..., t, None]
        fired = (z.imag >= cfg.v_th) & (prev_im < cfg.v_th)
        counts += fired
        first[fired & (first < 0)] = t
    return counts, first


@dataclass
class DetectionResult:
    bin: Optional[int]
    spike_counts: np.ndarray
    first_spike: Optional[np.ndarray] = None

    @property
    def detected(self) -> bool:
        return self.bin is not None


def select_bin(spike_counts, prominence: float = 0.5) -> Optional[int]:
    """Lowest non-DC bin whose spike count reaches ``prominence`` of the maximum."""
    counts = np.asarray(spike_counts)[1:]
    top = int(counts.max()) if counts.size else 0
    if top == 0:
        return None
    need = max(1, math.ceil(prominence * top))
    return int(np.flatnonzero(counts >= need)[0]) + 1


def detection_stream(frame: np.ndarray, cfg: RafConfig) -> np.ndarray:
    """Concatenated detection chirps of one antenna, re-centred to zero mean.

    ``frame`` is a preprocessed [antenna][chirp][sample] cube, or a stack of
    them with leading axes.
    """
    chirps = frame[..., cfg.antenna, : cfg.n_detect_chirps, :]
    stream = chirps.reshape(chirps.shape[:-2] + (-1,))
    # min-max scaling leaves a constant offset that would drive the lowest bins
    return stream - stream.mean(axis=-1, keepdims=True)


def detect_target(frame: np.ndarray, cfg: RafConfig = RafConfig()) -> DetectionResult:
    """Detect the hand range bin in one preprocessed frame."""
    counts, first = run_bank(detection_stream(np.asarray(frame), cfg), cfg,
                             n_samples=np.shape(frame)[-1])
    return DetectionResult(select_bin(counts, cfg.prominence), counts, first)


def detect_frames(frames: np.ndarray, cfg: RafConfig = RafConfig()) -> tuple:
    """Vectorised detection over preprocessed frames [frame][antenna][chirp][sample].

    Returns ``(bins, spike_counts, first_spike)`` where bins uses -1 for no detection.
    """
    counts, first = run_bank(detection_stream(frames, cfg), cfg, n_samples=frames.shape[-1])
    bins = np.array([b if b is not None else -1
                     for b in (select_bin(c, cfg.prominence) for c in counts)], dtype=np.int64)
    return bins, counts, first


def gesture_frame_from_bins(bins: Sequence[int]) -> Optional[int]:
    """Earliest frame holding the minimum detected bin; ``bins`` uses -1 for none."""
    b = np.asarray(bins)
    hit = b >= 0
    if not hit.any():
        return None
    b_min = b[hit].min()
    return int(np.flatnonzero(hit & (b == b_min))[0])


def find_gesture_frame(recording: Recording, cfg: RafConfig = RafConfig()) -> Optional[int]:
    bins, _, _ = detect_frames(preprocess_frames(recording.frames()), cfg)
    return gesture_frame_from_bins(bins)


def label_recording(recording, gesture_frame: int, kind: GestureClass) -> np.ndarray:
    """Frame labels: the gesture class around ``gesture_frame``, BACKGROUND elsewhere.

    ``recording`` is a :class:`Recording` or just its frame count.
    """
    n_frames = recording.n_frames if isinstance(recording, Recording) else int(recording)
    kind = GestureClass(kind)
    if kind is GestureClass.BACKGROUND:
        raise ValueError("labelling needs a gesture class")
    if not 0 <= gesture_frame < n_frames:
        raise ValueError(f"gesture frame {gesture_frame} outside [0, {n_frames})")
    before, after = PUSH_WINDOW if kind is GestureClass.PUSH else SWIPE_WINDOW
    labels = np.zeros(n_frames, dtype=np.int64)
    labels[max(0, gesture_frame - before): gesture_frame + after + 1] = int(kind)
    return labels


__all__ = [
    "RafConfig", "RafNeuronState", "DetectionResult", "raf_step", "run_bank", "select_bin",
    "detection_stream", "detect_target", "detect_frames", "gesture_frame_from_bins",
    "find_gesture_frame", "label_recording",
]
