"""Shared fixtures: a closed-form PL surrogate and small numerical grids."""

import numpy as np
import pytest
from loguru import logger

from src.core.types import MolecularParams, ParamRanges, PLScaling, TimeGrid
from src.services.dataset_factory import PLDataset, sample_initial_conditions
from src.services.field_shaper import FrequencyGrid
from src.services.pl_forward import ForwardModel, PLTrace, beta_grid, pl_value


class SurrogateModel:
    """Smooth stand-in for the density-matrix forward model.

    Omega2P sets the amplitude, gamma2 the width of the chirp response,
    Gamma12 the chirp-independent floor and E2 a broad resonance factor.
    """

    def __init__(self, scaling: PLScaling = PLScaling()):
        self.scaling = scaling
        self.calls = 0

    def rho11(self, params: MolecularParams, betas) -> np.ndarray:
        betas = np.asarray(betas, dtype=float)
        width = 500.0 + 40000.0 * params.gamma2
        floor = 50.0 * params.Gamma12
        detune = np.exp(-((params.E2 - 25940.0) / 4000.0) ** 2)
        amplitude = 0.8 * (params.omega_2p / 800.0) * detune
        return amplitude * (floor + (1.0 - floor) * np.exp(-(betas / width) ** 2))

    def trace(self, params: MolecularParams, betas, tau: float = 0.0) -> PLTrace:
        self.calls += 1
        return PLTrace(np.asarray(betas, dtype=float), pl_value(self.rho11(params, betas), self.scaling), tau)

    def traces(self, params_rows, betas) -> np.ndarray:
        return np.stack([self.trace(p, betas).values for p in params_rows])


class FailingModel:
    def trace(self, params, betas, tau=0.0):
        raise RuntimeError("solver exploded")


@pytest.fixture(autouse=True)
def quiet_logs():
    logger.remove()
    yield


@pytest.fixture
def surrogate():
    return SurrogateModel()


@pytest.fixture
def betas():
    return beta_grid(21, -3000.0, 3000.0)


@pytest.fixture
def truth():
    return MolecularParams(E2=25940.0, omega_2p=500.0, gamma2=0.02, Gamma12=0.006)


@pytest.fixture
def ranges():
    return ParamRanges()


@pytest.fixture
def small_freq_grid():
    return FrequencyGrid.for_time_step(0.04, 2 ** 15)


@pytest.fixture
def short_time_grid():
    return TimeGrid(t_start=-100.0, t_final=600.0, fine_dt=0.02, t_pulse_end=150.0)


@pytest.fixture
def fast_model(small_freq_grid, short_time_grid):
    return ForwardModel(freq_grid=small_freq_grid, time_grid=short_time_grid)


@pytest.fixture
def surrogate_dataset(surrogate, betas, ranges):
    """200 noiseless surrogate rows."""
    targets = sample_initial_conditions(200, ranges, seed=11)
    base = MolecularParams(E2=25940.0)
    features = surrogate.traces([base.with_estimate(*row) for row in targets], betas)
    return PLDataset(features, targets, seed=11, betas=betas)
