"""Recording-level processing for the three pipeline variants, frame labelling and dataset splits."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .dsp import doppler_fft, monopulse_angle, preprocess_frames, range_fft, wrap_phase
from .features import N_FEATURES, features_for_frames
from .radar import GestureClass, RadarConfig, Recording
from .raf import RafConfig, detect_frames, gesture_frame_from_bins, label_recording

log = logging.getLogger(__name__)

SPLIT_RATIOS = (0.58, 0.17, 0.25)
FFT_THRESHOLD_RATIO = 3.0


class PipelineVariant(enum.Enum):
    RAF_GOERTZEL = "RafGoertzel"
    FFT_DETECT_GOERTZEL = "FftDetectGoertzel"
    FFT_DETECT_FFT_FEATURES = "FftDetectFftFeatures"

    @classmethod
    def parse(cls, name: str) -> "PipelineVariant":
        key = name.strip().lower()
        for v in cls:
            if key in (v.value.lower(), v.cli_name):
                return v
        raise ValueError(f"unknown pipeline variant {name!r}")

    @property
    def cli_name(self) -> str:
        return {"RafGoertzel": "raf", "FftDetectGoertzel": "fft",
                "FftDetectFftFeatures": "fft-doppler"}[self.value]


def fft_detect_frames(frames_pre: np.ndarray, cfg: RafConfig = RafConfig(),
                      ratio: float = FFT_THRESHOLD_RATIO) -> np.ndarray:
    """Range-FFT detection on the RAF detection chirps; -1 where nothing survives.

    Magnitude spectra of the detection chirps are averaged, bins under
    ``ratio`` times the median are discarded and the lowest surviving
    non-DC local peak is returned.
    """
    chirps = frames_pre[..., cfg.antenna, : cfg.n_detect_chirps, :]
    mag = np.abs(range_fft(chirps)).mean(axis=-2)
    tau = ratio * np.median(mag, axis=-1, keepdims=True)
    # exact-tone spectra have a ~1e-15 floor whose median says nothing about noise
    tau = np.maximum(tau, 1e-9 * mag[..., 1:].max(axis=-1, keepdims=True))
    survive = mag >= tau
    survive[..., 0] = False
    right = np.concatenate([mag[..., 2:], np.full(mag.shape[:-1] + (1,), -np.inf)], axis=-1)
    peak = np.ones_like(survive)
    peak[..., 1:] = mag[..., 1:] >= right
    peak[..., 2:] &= mag[..., 2:] >= mag[..., 1:-1]
    ok = survive & peak & (mag[..., 1:].max(axis=-1, keepdims=True) > 0)
    return np.where(ok.any(axis=-1), ok.argmax(axis=-1), -1)


def fft_doppler_features(frames_pre: np.ndarray, bins: np.ndarray, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Features from a slow-time FFT at the hand bin: [frame][5], zeros where ``bins`` is -1."""
    bins = np.asarray(bins)
    out = np.zeros((len(bins), N_FEATURES))
    hit = np.flatnonzero(bins >= 1)
    if hit.size == 0:
        return out
    spectra = range_fft(frames_pre[hit])  # [h][antenna][chirp][bin]
    coeffs = np.take_along_axis(spectra, bins[hit][:, None, None, None], axis=-1)[..., 0]
    D = doppler_fft(coeffs)  # [h][antenna][doppler]
    n_c = D.shape[-1]
    power = np.abs(D).sum(axis=1)
    moving = power[:, 1:].max(axis=-1) > 1e-9 * (1.0 + power[:, 0])
    peak = np.where(moving, 1 + power[:, 1:].argmax(axis=-1), 0)
    signed = np.where(peak < n_c // 2, peak, peak - n_c)
    Dp = np.take_along_axis(D, peak[:, None, None], axis=-1)[..., 0]  # [h][antenna]
    out[hit, 0] = bins[hit]
    out[hit, 1] = wrap_phase(2 * np.pi * signed / n_c)
    out[hit, 2] = monopulse_angle(wrap_phase(np.angle(Dp[:, 2]) - np.angle(Dp[:, 0])), spacing_wavelengths)
    out[hit, 3] = monopulse_angle(wrap_phase(np.angle(Dp[:, 2]) - np.angle(Dp[:, 1])), spacing_wavelengths)
    out[hit, 4] = np.abs(Dp).mean(axis=-1)
    return out


@dataclass
class RecordingResult:
    features: np.ndarray  # [frame][5]
    labels: np.ndarray  # [frame]
    bins: np.ndarray  # detector output per frame, -1 for none
    raf_bins: np.ndarray
    gesture_frame: Optional[int]
    label: GestureClass

    @property
    def labelling_failed(self) -> bool:
        return self.label is not GestureClass.BACKGROUND and self.gesture_frame is None


def frame_labels(n_frames: int, kind: GestureClass, raf_bins) -> tuple:
    """Frame labels from RAF detections; all BACKGROUND if no gesture frame is found."""
    kind = GestureClass(kind)
    if kind is GestureClass.BACKGROUND:
        return np.zeros(n_frames, dtype=np.int64), None
    g = gesture_frame_from_bins(raf_bins)
    if g is None:
        return np.zeros(n_frames, dtype=np.int64), None
    return label_recording(n_frames, g, kind), g


def process_recording(rec: Recording, variant: PipelineVariant = PipelineVariant.RAF_GOERTZEL,
                      radar_cfg: RadarConfig = RadarConfig(), raf_cfg: RafConfig = RafConfig()) -> RecordingResult:
    """Features and labels for one recording.

    Labels always come from the RAF gesture frame so every variant trains
    against the same targets.
    """
    pre = preprocess_frames(rec.frames())
    raf_bins, _, _ = detect_frames(pre, raf_cfg)
    if variant is PipelineVariant.RAF_GOERTZEL:
        bins = raf_bins
    else:
        bins = fft_detect_frames(pre, raf_cfg)
    d = radar_cfg.antenna_spacing_wavelengths
    if variant is PipelineVariant.FFT_DETECT_FFT_FEATURES:
        feats = fft_doppler_features(pre, bins, d)
    else:
        feats = features_for_frames(pre, bins, d)
    labels, g = frame_labels(rec.n_frames, rec.label, raf_bins)
    return RecordingResult(feats, labels, bins, raf_bins, g, rec.label)


def recording_features(rec: Recording, variant: PipelineVariant = PipelineVariant.RAF_GOERTZEL,
                       radar_cfg: RadarConfig = RadarConfig(), raf_cfg: RafConfig = RafConfig()) -> np.ndarray:
    """Feature sequence [frame][5] only, without the labelling pass."""
    pre = preprocess_frames(rec.frames())
    if variant is PipelineVariant.RAF_GOERTZEL:
        bins, _, _ = detect_frames(pre, raf_cfg)
    else:
        bins = fft_detect_frames(pre, raf_cfg)
    d = radar_cfg.antenna_spacing_wavelengths
    if variant is PipelineVariant.FFT_DETECT_FFT_FEATURES:
        return fft_doppler_features(pre, bins, d)
    return features_for_frames(pre, bins, d)


def worker_count() -> int:
    """Parallelism cap from ``RAFR_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("RAFR_THREADS", "1")))
    except ValueError:
        return 1


def _process_args(args):
    rec, variants, radar_cfg, raf_cfg = args
    return [process_recording(rec, v, radar_cfg, raf_cfg) for v in variants]


@dataclass
class DatasetFeatures:
    features: np.ndarray  # [recording][frame][5]
    labels: np.ndarray  # [recording][frame]
    recording_labels: np.ndarray
    gesture_frames: list
    detected_bins: np.ndarray
    raf_bins: np.ndarray

    @property
    def labelling_failures(self) -> int:
        return sum(1 for g, lab in zip(self.gesture_frames, self.recording_labels)
                   if g is None and lab != GestureClass.BACKGROUND)


def _collect(results) -> DatasetFeatures:
    return DatasetFeatures(
        np.stack([r.features for r in results]),
        np.stack([r.labels for r in results]),
        np.array([int(r.label) for r in results], dtype=np.int64),
        [r.gesture_frame for r in results],
        np.stack([r.bins for r in results]),
        np.stack([r.raf_bins for r in results]),
    )


def extract_dataset(recordings: Iterable[Recording], variants=(PipelineVariant.RAF_GOERTZEL,),
                    radar_cfg: RadarConfig = RadarConfig(), raf_cfg: RafConfig = RafConfig(),
                    workers: Optional[int] = None) -> dict:
    """Process every recording once per variant. Returns ``{variant: DatasetFeatures}``.

    Recordings are consumed lazily; results keep input order regardless of ``workers``.
    """
    variants = tuple(variants)
    workers = worker_count() if workers is None else workers
    jobs = ((rec, variants, radar_cfg, raf_cfg) for rec in recordings)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per_rec = list(pool.map(_process_args, jobs, chunksize=4))
    else:
        per_rec = [_process_args(j) for j in jobs]
    if not per_rec:
        raise ValueError("empty dataset")
    return {v: _collect([r[i] for r in per_rec]) for i, v in enumerate(variants)}


def make_splits(labels, seed: int = 0, ratios=SPLIT_RATIOS) -> dict:
    """Stratified train/val/test recording indices using the given ratios per class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    out = {"train": [], "val": [], "test": []}
    for c in sorted(set(labels.tolist())):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(round(ratios[0] * idx.size))
        n_va = int(round(ratios[1] * idx.size))
        out["train"] += idx[:n_tr].tolist()
        out["val"] += idx[n_tr:n_tr + n_va].tolist()
        out["test"] += idx[n_tr + n_va:].tolist()
    return {k: sorted(int(i) for i in v) for k, v in out.items()}
