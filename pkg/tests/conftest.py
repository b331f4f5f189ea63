import math

import numpy as np
import pytest

from rafgesture.radar import RadarConfig, TargetState, max_velocity, range_resolution

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def cfg():
    return RadarConfig()


def target_at_bin(cfg, bin, velocity=None, azimuth=0.0, elevation=0.0, amplitude=1.0):
    """Point target sitting exactly on a range bin, moving on the Doppler grid by default."""
    v = max_velocity(cfg) / 8 if velocity is None else velocity
    return TargetState(bin * range_resolution(cfg), v, azimuth, elevation, amplitude)


def doppler_grid_velocity(cfg, m):
    """Velocity whose per-chirp phase step is pi*m/16, so the frame holds whole Doppler cycles."""
    return m * max_velocity(cfg) / 16


def wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
