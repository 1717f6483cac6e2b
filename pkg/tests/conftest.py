import numpy as np
import pytest

from odofusion.model import REFERENCE_NOISE, NoiseSpec, SensorTrace, TimeGrid, constant_speed_trajectory, simulate_sensors


def make_trace(m=30, lam=10, noise=REFERENCE_NOISE, seed=7, substream=None, distance=400.0):
    grid = TimeGrid(m=m, lam=lam, horizon=float(m))
    traj = constant_speed_trajectory(grid, distance)
    return simulate_sensors(traj, noise, grid, seed, substream)


def with_gps(trace, gps):
    return SensorTrace(trace.grid, trace.odometer, gps, trace.truth, seed=trace.seed)


@pytest.fixture
def noise():
    return REFERENCE_NOISE


@pytest.fixture
def trace():
    return make_trace()


@pytest.fixture
def zero_noise_trace():
    return make_trace(noise=NoiseSpec(0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
