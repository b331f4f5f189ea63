import struct

import numpy as np
import pytest

from rafgesture.container import (DataError, DatasetWriter, dataset_size, encode_recording,
                                  iter_recordings, read_dataset, read_labels, read_recording,
                                  write_dataset)
from rafgesture.radar import GestureClass, GestureParams, RadarConfig, Recording, synth_gesture_recording

SMALL = RadarConfig(n_frames=12, n_chirps=4, n_samples=32)  # max range 0.6 m
PARAMS = GestureParams(window_frames=6, hand_range=0.2, push_depth=0.2, body_range=0.5)


def _recordings():
    return [synth_gesture_recording(SMALL, k, PARAMS, seed=int(k)) for k in GestureClass]


def test_roundtrip(tmp_path):
    recs = _recordings()
    path = tmp_path / "d.rafd"
    assert write_dataset(path, recs) == 6
    back = read_dataset(path)
    assert dataset_size(path) == 6
    assert read_labels(path) == [r.label for r in recs]
    for a, b in zip(recs, back):
        assert b.label == a.label
        assert np.array_equal(a.samples, b.samples)
        for ga, gb in zip(a.ground_truth, b.ground_truth):
            if ga is None:
                assert gb is None
            else:
                assert np.allclose(ga.as_tuple(), gb.as_tuple(), rtol=1e-6)


def test_rewrite_is_byte_identical(tmp_path):
    write_dataset(tmp_path / "a.rafd", _recordings())
    write_dataset(tmp_path / "b.rafd", read_dataset(tmp_path / "a.rafd"))
    assert (tmp_path / "a.rafd").read_bytes() == (tmp_path / "b.rafd").read_bytes()


def test_random_access(tmp_path):
    recs = _recordings()
    write_dataset(tmp_path / "d.rafd", recs)
    r = read_recording(tmp_path / "d.rafd", 4)
    assert r.label == GestureClass(4) and np.array_equal(r.samples, recs[4].samples)
    with pytest.raises(IndexError):
        read_recording(tmp_path / "d.rafd", 6)


def test_streaming_writer_patches_count(tmp_path):
    with DatasetWriter(tmp_path / "d.rafd") as w:
        for r in _recordings()[:3]:
            w.write(r)
    assert dataset_size(tmp_path / "d.rafd") == 3
    assert len(list(iter_recordings(tmp_path / "d.rafd"))) == 3


def test_empty_dataset(tmp_path):
    assert write_dataset(tmp_path / "e.rafd", []) == 0
    assert read_dataset(tmp_path / "e.rafd") == []


def test_no_ground_truth(tmp_path):
    r = Recording(np.ones((3, 2, 2, 4), dtype=np.float32), GestureClass.PUSH)
    write_dataset(tmp_path / "d.rafd", [r])
    assert read_dataset(tmp_path / "d.rafd")[0].ground_truth is None


def test_bad_magic(tmp_path):
    p = tmp_path / "x.rafd"
    p.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(DataError):
        dataset_size(p)


def test_bad_version(tmp_path):
    p = tmp_path / "x.rafd"
    p.write_bytes(struct.pack("<4sHHI", b"RAFD", 9, 0, 0))
    with pytest.raises(DataError):
        dataset_size(p)


def test_truncated_file(tmp_path):
    p = tmp_path / "d.rafd"
    write_dataset(p, _recordings()[:2])
    data = p.read_bytes()
    p.write_bytes(data[:-50])
    with pytest.raises(DataError):
        read_dataset(p)


def test_unknown_label(tmp_path):
    p = tmp_path / "d.rafd"
    write_dataset(p, _recordings()[:1])
    data = bytearray(p.read_bytes())
    data[12] = 9
    p.write_bytes(bytes(data))
    with pytest.raises(DataError):
        read_dataset(p)


def test_non_finite_samples_rejected():
    s = np.zeros((3, 2, 2, 4), dtype=np.float32)
    s[0, 0, 0, 0] = np.nan
    with pytest.raises(DataError):
        encode_recording(Recording(s, GestureClass.PUSH))
