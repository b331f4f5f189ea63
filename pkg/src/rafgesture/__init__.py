"""Gesture recognition from simulated FMCW radar with resonate-and-fire range detection."""

from .radar import (C0, GESTURES, GestureClass, GestureParams, RadarConfig, Recording, TargetState,
                    max_range, max_velocity, range_resolution, synth_frame, synth_gesture_recording)
from .dsp import fft_radix2, goertzel, monopulse_angle, preprocess, wrap_phase
from .raf import RafConfig, detect_target, find_gesture_frame, label_recording, raf_step
from .features import FeatureScaler, FeatureVector, extract_features, fit_scaler
from .nn import GruModel, TrainConfig, evaluate, gru_forward, param_count, train
from .pipeline import PipelineVariant, extract_dataset, make_splits, process_recording
from .bench import op_counts, run_benchmark

__version__ = "0.1.0"
