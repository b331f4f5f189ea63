"""Per-frame features at the detected hand bin, and the train-set standardising scaler."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dsp import goertzel_many, monopulse_angle, preprocess, wrap_phase
from .radar import RadarConfig
from .raf import RafConfig, detect_target

FEATURE_NAMES = ("range_bin", "doppler_phase", "azimuth", "elevation", "rms_amplitude")
N_FEATURES = len(FEATURE_NAMES)
CSV_HEADER = ("recording_id", "frame") + FEATURE_NAMES + ("label",)

# coefficients below this magnitude have no usable phase
ZERO_COEFF = 1e-12


@dataclass(frozen=True)
class FeatureVector:
    range_bin: float = 0.0
    doppler_phase: float = 0.0
    azimuth: float = 0.0
    elevation: float = 0.0
    rms_amplitude: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.range_bin, self.doppler_phase, self.azimuth,
                         self.elevation, self.rms_amplitude])

    @classmethod
    def from_array(cls, a) -> "FeatureVector":
        return cls(*(float(v) for v in a))


def goertzel_matrix(frame: np.ndarray, bin: int) -> np.ndarray:
    """Goertzel coefficient at ``bin`` for every antenna and chirp: [antenna][chirp]."""
    n_half = frame.shape[-1] // 2
    if not 1 <= bin < n_half:
        raise ValueError(f"bin {bin} outside [1, {n_half - 1}]")
    return goertzel_many(frame, bin)


def _phase_diff(a: np.ndarray, b: np.ndarray):
    """Wrapped phase differences angle(a) - angle(b) and a mask of usable pairs."""
    ok = (np.abs(a) > ZERO_COEFF) & (np.abs(b) > ZERO_COEFF)
    return wrap_phase(np.angle(a) - np.angle(b)), ok


def _masked_mean(values, ok, axis=-1):
    n = ok.sum(axis=axis)
    total = np.where(ok, values, 0.0).sum(axis=axis)
    return np.where(n > 0, total / np.maximum(n, 1), 0.0)


def doppler_feature(G: np.ndarray) -> float:
    """Mean over antennas of the wrapped phase step from chirp 0 to chirp 1."""
    G = np.asarray(G)
    if G.shape[-1] < 2:
        raise ValueError("need at least two chirps")
    d, ok = _phase_diff(G[..., 1], G[..., 0])
    out = _masked_mean(d, ok)
    return float(out) if out.ndim == 0 else out


def angle_features(G: np.ndarray, spacing_wavelengths: float = 0.5):
    """(azimuth, elevation) by phase monopulse on antenna pairs (2, 0) and (2, 1)."""
    G = np.asarray(G)
    if G.shape[-2] != 3:
        raise ValueError("angle estimation needs exactly three antennas")
    d_az, ok_az = _phase_diff(G[..., 2, :], G[..., 0, :])
    d_el, ok_el = _phase_diff(G[..., 2, :], G[..., 1, :])
    az = monopulse_angle(_masked_mean(d_az, ok_az), spacing_wavelengths)
    el = monopulse_angle(_masked_mean(d_el, ok_el), spacing_wavelengths)
    return az, el


def rms_amplitude(G: np.ndarray) -> float:
    G = np.asarray(G)
    if G.shape[-1] == 0 or G.shape[-2] == 0:
        raise ValueError("empty coefficient matrix")
    out = np.sqrt(np.mean(np.abs(G) ** 2, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def features_at_bin(frame_pre: np.ndarray, bin: Optional[int], spacing_wavelengths: float = 0.5) -> FeatureVector:
    """Feature vector of a preprocessed frame at a given hand bin (zeros when absent)."""
    if bin is None:
        return FeatureVector()
    G = goertzel_matrix(frame_pre, bin)
    az, el = angle_features(G, spacing_wavelengths)
    return FeatureVector(float(bin), doppler_feature(G), az, el, rms_amplitude(G))


def extract_features(frame: np.ndarray, raf_cfg: RafConfig = RafConfig(),
                     radar_cfg: RadarConfig = RadarConfig()) -> FeatureVector:
    """Preprocess a raw frame, detect the hand with the RAF bank and compute its features."""
    frame = np.asarray(frame)
    expected = (radar_cfg.n_antennas, radar_cfg.n_chirps, radar_cfg.n_samples)
    if frame.shape != expected:
        raise ValueError(f"frame shape {frame.shape} != {expected}")
    pre = preprocess(frame)
    det = detect_target(pre, raf_cfg)
    return features_at_bin(pre, det.bin, radar_cfg.antenna_spacing_wavelengths)


def features_for_frames(frames_pre: np.ndarray, bins: np.ndarray, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Vectorised features for preprocessed frames [frame][antenna][chirp][sample].

    ``bins`` holds one hand bin per frame, -1 for no detection. Returns [frame][5].
    """
    bins = np.asarray(bins)
    out = np.zeros((len(bins), N_FEATURES))
    hit = np.flatnonzero(bins >= 1)
    if hit.size == 0:
        return out
    k = bins[hit][:, None, None]
    G = goertzel_many(frames_pre[hit], k)
    az, el = angle_features(G, spacing_wavelengths)
    out[hit, 0] = bins[hit]
    out[hit, 1] = doppler_feature(G)
    out[hit, 2] = az
    out[hit, 3] = el
    out[hit, 4] = rms_amplitude(G)
    return out


@dataclass
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray
    eps: float = 1e-8

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.mean) / np.maximum(self.std, self.eps)

    def to_json(self) -> str:
        return json.dumps({"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]})

    @classmethod
    def from_dict(cls, d) -> "FeatureScaler":
        mean, std = np.asarray(d["mean"], float), np.asarray(d["std"], float)
        if mean.shape != (N_FEATURES,) or std.shape != (N_FEATURES,):
            raise ValueError("scaler needs five means and five stds")
        return cls(mean, std)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "FeatureScaler":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_scaler(train_features: np.ndarray, eps: float = 1e-8) -> FeatureScaler:
    x = np.asarray(train_features, dtype=np.float64).reshape(-1, N_FEATURES)
    if x.shape[0] < 2:
        raise ValueError("need at least two training rows to fit the scaler")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), eps)
    return FeatureScaler(mean, std, eps)


def apply_scaler(scaler: FeatureScaler, features: np.ndarray) -> np.ndarray:
    return scaler.transform(features)


def write_features_csv(path, recording_ids, features: np.ndarray, labels: np.ndarray):
    """Write [recording][frame][5] features and [recording][frame] labels."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rid, feats, labs in zip(recording_ids, features, labels):
            for f, (row, lab) in enumerate(zip(feats, labs)):
                w.writerow([int(rid), f, *(repr(float(v)) for v in row), int(lab)])


def read_features_csv(path):
    """Returns ``(recording_ids, features [n][T][5], labels [n][T])``, ordered by recording id."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected features header: {header}")
        rows = {}
        for line in r:
            rows.setdefault(int(line[0]), []).append(
                (int(line[1]), [float(v) for v in line[2:7]], int(line[7])))
    ids = sorted(rows)
    feats, labs = [], []
    for rid in ids:
        frames = sorted(rows[rid])
        if [f for f, _, _ in frames] != list(range(len(frames))):
            raise ValueError(f"recording {rid} has missing or duplicate frames")
        feats.append([v for _, v, _ in frames])
        labs.append([lab for _, _, lab in frames])
    return np.array(ids), np.array(feats, dtype=np.float64), np.array(labs, dtype=np.int64)
