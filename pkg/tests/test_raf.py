import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import target_at_bin
from rafgesture.dsp import preprocess, preprocess_frames
from rafgesture.radar import (GESTURES, GestureClass, GestureParams, RadarConfig, max_velocity,
                              synth_frame, synth_gesture_recording)
from rafgesture.raf import (RafConfig, RafNeuronState, detect_frames, detect_target, detection_stream,
                            find_gesture_frame, gesture_frame_from_bins, label_recording, raf_step,
                            run_bank, select_bin)


def test_config_validation():
    for kw in (dict(alpha=0.0), dict(alpha=1.0), dict(v_th=0.0), dict(n_neurons=16),
               dict(input_gain=0.0), dict(prominence=0.0)):
        with pytest.raises(ValueError):
            RafConfig(**kw)
    assert RafConfig().stream_length == 192


def test_step_rotates_and_decays():
    s = RafNeuronState(re=1.0, im=0.0, phase_increment=math.pi / 2)
    new, spiked = raf_step(s, 0.0, alpha=0.1, v_th=10.0)
    assert new.re == pytest.approx(0.0, abs=1e-15)
    assert new.im == pytest.approx(0.9)
    assert not spiked and new.steps == 1


def test_spike_is_upward_crossing_without_reset():
    s = RafNeuronState(re=1.0, im=0.0, phase_increment=math.pi / 2)
    s, spiked = raf_step(s, 0.0, alpha=0.0 + 1e-9, v_th=0.5)
    assert spiked and s.first_spike_step == 0 and s.spike_count == 1
    assert s.im > 0.5  # state kept after the spike
    s, spiked = raf_step(s, 0.0, alpha=1e-9, v_th=0.5)
    assert not spiked  # already above threshold, no new crossing


def test_bank_matches_single_neuron_steps():
    rng = np.random.default_rng(3)
    cfg = RafConfig()
    x = rng.uniform(-0.5, 0.5, 192)
    counts, first = run_bank(x, cfg)
    for k in (0, 3, 17, 31):
        s = RafNeuronState.for_bin(k)
        for v in x:
            s, _ = raf_step(s, v, cfg.alpha, cfg.v_th, cfg.input_gain)
        assert s.spike_count == counts[k]
        assert (s.first_spike_step if s.first_spike_step is not None else -1) == first[k]


@pytest.mark.parametrize("k", [2, 7, 16, 25, 30])
def test_tone_drives_its_own_neuron(k):
    x = 0.5 * np.cos(2 * np.pi * k * np.arange(192) / 64)  # peak-to-peak 1, like a scaled frame
    counts, _ = run_bank(x, RafConfig())
    assert counts.argmax() == k
    assert select_bin(counts) == k


def test_silence_never_spikes():
    counts, first = run_bank(np.zeros(192), RafConfig())
    assert not counts.any() and (first == -1).all()


def test_select_bin_rules():
    assert select_bin(np.zeros(32)) is None
    c = np.zeros(32, dtype=int)
    c[0] = 50  # DC never counts
    assert select_bin(c) is None
    c[12], c[20] = 10, 4
    assert select_bin(c) == 12
    c[5] = 5
    assert select_bin(c) == 5  # 5 >= ceil(0.5 * 10)
    c[5] = 4
    assert select_bin(c) == 12


def test_detection_stream_is_centred():
    frame = np.random.default_rng(0).uniform(size=(3, 32, 64))
    s = detection_stream(frame, RafConfig())
    assert s.shape == (192,)
    assert abs(s.mean()) < 1e-12
    assert np.allclose(s + frame[0, :3].mean(), frame[0, :3].ravel())


@given(bin=st.integers(2, 30), frac=st.floats(0.1, 0.5), sign=st.sampled_from([-1, 1]),
       az=st.floats(-0.6, 0.6), el=st.floats(-0.6, 0.6))
@settings(max_examples=60, deadline=None)
def test_single_target_detected_at_its_bin(bin, frac, sign, az, el):
    cfg = RadarConfig()
    t = target_at_bin(cfg, bin, sign * frac * max_velocity(cfg), az, el)
    assert detect_target(preprocess(synth_frame(cfg, [t]))).bin == bin


def test_hand_wins_over_body(cfg):
    hand = target_at_bin(cfg, 8, 0.3 * max_velocity(cfg))
    body = target_at_bin(cfg, 25, 0.05 * max_velocity(cfg), amplitude=(8 / 25) ** 2)
    assert detect_target(preprocess(synth_frame(cfg, [hand, body]))).bin == 8


def test_static_target_is_invisible_after_mti(cfg):
    t = target_at_bin(cfg, 10, 0.0)
    res = detect_target(preprocess(synth_frame(cfg, [t])))
    assert res.bin is None and not res.detected


def test_detect_frames_matches_single(cfg):
    rng = np.random.default_rng(5)
    frames = np.stack([synth_frame(cfg, [target_at_bin(cfg, b, 1.0)], 0.02, rng) for b in (4, 9, 20)])
    pre = preprocess_frames(frames)
    bins, counts, first = detect_frames(pre)
    for i in range(3):
        r = detect_target(pre[i])
        assert bins[i] == r.bin
        assert np.array_equal(counts[i], r.spike_counts)
        assert np.array_equal(first[i], r.first_spike)


def test_gesture_frame_from_bins():
    assert gesture_frame_from_bins([-1, -1]) is None
    assert gesture_frame_from_bins([-1, 9, 7, 8, 7, -1]) == 2


@pytest.mark.parametrize("kind", GESTURES)
def test_gesture_frame_near_closest_approach(kind):
    cfg = RadarConfig()
    rec = synth_gesture_recording(cfg, kind, GestureParams(noise_std=0.02), seed=int(kind))
    g = find_gesture_frame(rec)
    hand = [(t.range, i) for i, t in enumerate(rec.ground_truth) if t is not None]
    closest = min(hand)[1]
    first, last = hand[0][1], hand[-1][1]
    assert g is not None and first <= g <= last
    assert abs(rec.ground_truth[g].range - rec.ground_truth[closest].range) < 0.04


def test_background_raster_is_silent():
    rec = synth_gesture_recording(RadarConfig(), GestureClass.BACKGROUND, GestureParams(noise_std=0.01), seed=2)
    bins, counts, _ = detect_frames(preprocess_frames(rec.frames()))
    assert (bins == -1).all() and not counts.any()
    assert find_gesture_frame(rec) is None


def test_label_windows_interior():
    lab = label_recording(100, 50, GestureClass.SWIPE_UP)
    assert np.flatnonzero(lab).tolist() == list(range(46, 55))
    lab = label_recording(100, 50, GestureClass.PUSH)
    assert np.flatnonzero(lab).tolist() == list(range(45, 54))
    assert set(lab.tolist()) == {0, int(GestureClass.PUSH)}


def test_label_windows_clip():
    assert np.flatnonzero(label_recording(100, 2, GestureClass.PUSH)).tolist() == list(range(0, 6))
    assert np.flatnonzero(label_recording(100, 97, GestureClass.SWIPE_LEFT)).tolist() == list(range(93, 100))


def test_label_errors():
    with pytest.raises(ValueError):
        label_recording(100, 10, GestureClass.BACKGROUND)
    with pytest.raises(ValueError):
        label_recording(100, 100, GestureClass.PUSH)
    with pytest.raises(ValueError):
        label_recording(100, -1, GestureClass.PUSH)


@given(g=st.integers(0, 99), kind=st.sampled_from(GESTURES))
def test_label_count_property(g, kind):
    before, after = (5, 3) if kind is GestureClass.PUSH else (4, 4)
    lab = label_recording(100, g, kind)
    assert (lab > 0).sum() == min(99, g + after) - max(0, g - before) + 1
    assert lab[g] == int(kind)
