"""Operation-count comparison and wall-clock benchmark of the three pipeline variants."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .nn import evaluate
from .pipeline import PipelineVariant, recording_features
from .radar import RadarConfig, Recording
from .raf import RafConfig

BENCH_HEADER = ("variant", "detect_ops", "feature_ops", "median_us_per_frame", "accuracy")


@dataclass(frozen=True)
class OpCountReport:
    fft_detection_ops: int
    raf_detection_ops: int
    doppler_fft_ops: int
    goertzel_doppler_ops: int
    n_chirps: int
    n_samples: int
    n_neurons: int
    raf_samples: int

    def detect_ops(self, variant: PipelineVariant) -> int:
        return self.raf_detection_ops if variant is PipelineVariant.RAF_GOERTZEL else self.fft_detection_ops

    def feature_ops(self, variant: PipelineVariant) -> int:
        if variant is PipelineVariant.FFT_DETECT_FFT_FEATURES:
            return self.doppler_fft_ops
        return self.goertzel_doppler_ops


def op_counts(cfg: RadarConfig = RadarConfig(), raf_cfg: RafConfig = RafConfig()) -> OpCountReport:
    n_c, n_s = cfg.n_chirps, cfg.n_samples
    raf_samples = raf_cfg.n_detect_chirps * n_s
    return OpCountReport(
        fft_detection_ops=int(round(n_c * n_s * math.log2(n_s))),
        raf_detection_ops=raf_cfg.n_neurons * raf_samples,
        doppler_fft_ops=int(round(n_c * math.log2(n_c))),
        goertzel_doppler_ops=n_c,
        n_chirps=n_c, n_samples=n_s, n_neurons=raf_cfg.n_neurons, raf_samples=raf_samples,
    )


def baseline_fft_pipeline(recording: Recording, variant: PipelineVariant,
                          radar_cfg: RadarConfig = RadarConfig(), raf_cfg: RafConfig = RafConfig()) -> np.ndarray:
    """Per-frame features [frame][5] of one of the FFT-detection baselines."""
    if variant is PipelineVariant.RAF_GOERTZEL:
        raise ValueError("baseline_fft_pipeline covers the FFT-detection variants only")
    return recording_features(recording, variant, radar_cfg, raf_cfg)


@dataclass
class BenchRow:
    variant: PipelineVariant
    detect_ops: int
    feature_ops: int
    median_us_per_frame: float
    accuracy: Optional[float]

    def as_csv_row(self) -> list:
        acc = "" if self.accuracy is None else f"{self.accuracy:.6f}"
        return [self.variant.value, self.detect_ops, self.feature_ops,
                f"{self.median_us_per_frame:.3f}", acc]


def time_variant(recordings: Sequence[Recording], variant: PipelineVariant, repetitions: int,
                 radar_cfg: RadarConfig, raf_cfg: RafConfig) -> float:
    """Median over repetitions of the mean wall-clock microseconds per frame."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    n_frames = sum(r.n_frames for r in recordings)
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for rec in recordings:
            recording_features(rec, variant, radar_cfg, raf_cfg)
        samples.append((time.perf_counter() - t0) * 1e6 / n_frames)
    return float(np.median(samples))


def run_benchmark(timing_recordings: Sequence[Recording], variants: Sequence[PipelineVariant],
                  repetitions: int = 3, models: Optional[dict] = None, test_features: Optional[dict] = None,
                  test_labels: Optional[np.ndarray] = None, radar_cfg: RadarConfig = RadarConfig(),
                  raf_cfg: RafConfig = RafConfig()) -> list:
    """One row per variant: op counts, median time per frame and mean model accuracy.

    ``models`` maps variant to a list of trained :class:`GruModel`;
    ``test_features`` maps variant to unscaled test features. Without
    models the accuracy column stays empty.
    """
    if not timing_recordings:
        raise ValueError("no recordings to time")
    ops = op_counts(radar_cfg, raf_cfg)
    rows = []
    for v in variants:
        acc = None
        if models is not None:
            if not models.get(v):
                raise FileNotFoundError(f"no trained models for variant {v.value}")
            acc = evaluate(models[v], test_features[v], test_labels).mean
        us = time_variant(timing_recordings, v, repetitions, radar_cfg, raf_cfg)
        rows.append(BenchRow(v, ops.detect_ops(v), ops.feature_ops(v), us, acc))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow(r.as_csv_row())
    return buf.getvalue()


def op_count_dict(report: OpCountReport) -> dict:
    return asdict(report)
