"""RAFD binary dataset container.

Layout (little-endian)::

    "RAFD" | u16 version=1 | u16 reserved | u32 count
    per recording:
        u8 label | u8 n_antennas | u8 pad x2 | u16 n_frames | u16 n_chirps | u16 n_samples | u16 pad
        f32 samples [antenna][frame][chirp][sample]
        u8 has_ground_truth [, f32 x5 per frame: range, velocity, azimuth, elevation, amplitude]

Frames without a target store NaN in all five ground-truth slots.
"""

from __future__ import annotations

import struct
from typing import Iterable, Iterator

import numpy as np

from .radar import GestureClass, Recording, TargetState

MAGIC = b"RAFD"
VERSION = 1
_HEADER = struct.Struct("<4sHHI")
_REC = struct.Struct("<BBxxHHHxx")


class DataError(ValueError):
    """Malformed or inconsistent dataset content."""


def _gt_array(rec: Recording) -> np.ndarray:
    gt = np.full((rec.n_frames, 5), np.nan, dtype="<f4")
    for i, t in enumerate(rec.ground_truth):
        if t is not None:
            gt[i] = t.as_tuple()
    return gt


def _gt_list(arr: np.ndarray) -> list:
    return [None if np.isnan(row).all() else TargetState(*(float(v) for v in row)) for row in arr]


def encode_recording(rec: Recording) -> bytes:
    n_ant, n_frames, n_chirps, n_samples = rec.samples.shape
    if max(n_ant, int(rec.label)) > 255 or max(n_frames, n_chirps, n_samples) > 65535:
        raise DataError("recording dimensions exceed the container field widths")
    samples = np.asarray(rec.samples)
    if not np.all(np.isfinite(samples)):
        raise DataError("recording contains non-finite samples")
    parts = [_REC.pack(int(rec.label), n_ant, n_frames, n_chirps, n_samples),
             np.ascontiguousarray(samples, dtype="<f4").tobytes()]
    if rec.ground_truth is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(_gt_array(rec).tobytes())
    return b"".join(parts)


class DatasetWriter:
    """Streaming writer; the recording count in the header is patched on close."""

    def __init__(self, path):
        self.path = path
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, 0, 0))

    def write(self, rec: Recording):
        self._fh.write(encode_recording(rec))
        self.count += 1

    def close(self):
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(MAGIC, VERSION, 0, self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_dataset(path, recordings: Iterable[Recording]) -> int:
    with DatasetWriter(path) as w:
        for rec in recordings:
            w.write(rec)
    return w.count


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError("unexpected end of dataset file")
    return buf


def read_header(fh) -> int:
    magic, version, _, count = _HEADER.unpack(_read_exact(fh, _HEADER.size))
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"unsupported container version {version}")
    return count


def _read_record(fh, skip_samples: bool = False):
    label, n_ant, n_frames, n_chirps, n_samples = _REC.unpack(_read_exact(fh, _REC.size))
    try:
        label = GestureClass(label)
    except ValueError as exc:
        raise DataError(f"unknown label {label}") from exc
    n = n_ant * n_frames * n_chirps * n_samples
    if skip_samples:
        fh.seek(4 * n, 1)
        samples = None
    else:
        samples = np.frombuffer(_read_exact(fh, 4 * n), dtype="<f4").reshape(
            n_ant, n_frames, n_chirps, n_samples).astype(np.float32)
    flag = _read_exact(fh, 1)[0]
    gt = None
    if flag == 1:
        gt = np.frombuffer(_read_exact(fh, 20 * n_frames), dtype="<f4").reshape(n_frames, 5)
    elif flag != 0:
        raise DataError(f"bad ground-truth flag {flag}")
    return label, samples, gt, n_frames


def iter_recordings(path) -> Iterator[Recording]:
    with open(path, "rb") as fh:
        count = read_header(fh)
        for _ in range(count):
            label, samples, gt, _ = _read_record(fh)
            yield Recording(samples, label, None if gt is None else _gt_list(gt))


def read_dataset(path) -> list:
    return list(iter_recordings(path))


def dataset_size(path) -> int:
    with open(path, "rb") as fh:
        return read_header(fh)


def read_labels(path) -> list:
    """Recording labels without loading sample data."""
    out = []
    with open(path, "rb") as fh:
        for _ in range(read_header(fh)):
            out.append(_read_record(fh, skip_samples=True)[0])
    return out


def read_recording(path, index: int) -> Recording:
    with open(path, "rb") as fh:
        count = read_header(fh)
        if not 0 <= index < count:
            raise IndexError(f"recording {index} out of range (dataset holds {count})")
        for _ in range(index):
            _read_record(fh, skip_samples=True)
        label, samples, gt, _ = _read_record(fh)
    return Recording(samples, label, None if gt is None else _gt_list(gt))

