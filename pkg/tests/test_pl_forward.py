from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.core.exceptions import DomainError, ShapeMismatchError, ValidationError
from src.core.types import MolecularParams, PLScaling, TimeGrid
from src.services.pl_forward import (
    ControlSurface,
    ForwardModel,
    PLTrace,
    TauTrace,
    beta_grid,
    beta_trace,
    pl_value,
    tau_trace,
)


def test_pl_value_is_affine():
    scaling = PLScaling(A=742.88, B=43.73)
    assert pl_value(0.0, scaling) == pytest.approx(43.73)
    assert pl_value(1.0, scaling) == pytest.approx(786.61)
    np.testing.assert_allclose(pl_value(np.array([0.25, 0.5]), scaling), [229.45, 415.17])


def test_pl_value_clips_round_off_only():
    scaling = PLScaling()
    assert pl_value(-1e-9, scaling) == pytest.approx(scaling.B)
    with pytest.raises(DomainError):
        pl_value(1.2, scaling)
    with pytest.raises(DomainError):
        pl_value(np.array([0.1, -0.01]), scaling)


def test_default_beta_grid():
    betas = beta_grid()
    assert betas.size == 55
    assert betas[0] == -3000.0 and betas[-1] == 3000.0
    assert np.allclose(np.diff(betas), 6000.0 / 54)


def test_beta_grid_validation():
    with pytest.raises(ValidationError):
        beta_grid(1)
    with pytest.raises(ValidationError):
        beta_grid(10, 5.0, 5.0)


def test_trace_validation():
    with pytest.raises(ShapeMismatchError):
        PLTrace(np.arange(3.0), np.arange(4.0))
    with pytest.raises(ValidationError):
        PLTrace(np.array([0.0, 0.0, 1.0]), np.ones(3))
    with pytest.raises(ValidationError):
        TauTrace(np.array([2.0, 1.0]), np.ones(2))


def test_trace_frame_columns():
    trace = PLTrace(np.array([-1.0, 0.0, 1.0]), np.array([50.0, 60.0, 50.0]))
    frame = trace.to_frame()
    assert list(frame.columns) == ["beta_fs2", "pl_cps"]
    again = PLTrace.from_frame(frame)
    np.testing.assert_array_equal(again.values, trace.values)
    with pytest.raises(ValidationError):
        PLTrace.from_frame(pd.DataFrame({"beta": [0.0]}))


def test_control_surface_shape_and_frame():
    surface = ControlSurface(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 100.0]), np.full((2, 3), 0.1))
    frame = surface.to_frame()
    assert len(frame) == 6
    assert list(frame.columns) == ["beta_fs2", "tau_fs", "rho11"]
    np.testing.assert_array_equal(surface.row(100.0), [0.1, 0.1, 0.1])
    with pytest.raises(ShapeMismatchError):
        ControlSurface(np.zeros(3), np.zeros(2), np.zeros((3, 2)))
    with pytest.raises(DomainError):
        ControlSurface(np.zeros(1), np.zeros(1), np.full((1, 1), 1.5))


@pytest.mark.slow
def test_dark_molecule_gives_background(fast_model):
    trace = fast_model.trace(MolecularParams(omega_2p=0.0), [-1000.0, 0.0, 1000.0])
    np.testing.assert_allclose(trace.values, fast_model.scaling.B)


@pytest.mark.slow
def test_trace_is_affine_in_scaling(fast_model):
    params = MolecularParams()
    betas = [-800.0, 0.0, 800.0]
    base = beta_trace(params, PLScaling(A=1.0, B=0.0), betas, fast_model)
    scaled = beta_trace(params, PLScaling(A=742.88, B=43.73), betas, fast_model)
    np.testing.assert_allclose(scaled.values, 742.88 * base.values + 43.73, rtol=1e-12)
    assert np.all(base.values > 0.0)


@pytest.mark.slow
def test_workers_do_not_change_results(fast_model):
    params = MolecularParams()
    betas = [-500.0, 0.0, 500.0, 1000.0]
    serial = fast_model.trace(params, betas)
    parallel = replace(fast_model, workers=2).trace(params, betas)
    np.testing.assert_allclose(parallel.values, serial.values, rtol=1e-10)


@pytest.mark.slow
def test_surface_rows_follow_taus(fast_model):
    params = MolecularParams()
    surface = fast_model.surface(params, [0.0, 1000.0], [0.0, 60.0])
    assert surface.rho11.shape == (2, 2)
    row = fast_model.beta_populations([params], [0.0, 1000.0], tau=60.0)[0]
    np.testing.assert_allclose(surface.row(60.0), row, rtol=1e-10)


@pytest.mark.slow
def test_tau_trace_starts_at_the_unmasked_pulse(fast_model):
    params = MolecularParams()
    delays = tau_trace(params, fast_model.scaling, [0.0, 80.0], fast_model)
    assert list(delays.to_frame().columns) == ["tau_fs", "pl_cps"]
    assert delays.beta == 0.0
    assert delays.values[0] == pytest.approx(fast_model.trace(params, [0.0]).values[0], rel=1e-9)


@pytest.fixture
def landscape_model(small_freq_grid):
    """Full time window with derived pulse ends; coarser fine step than the default."""
    return ForwardModel(freq_grid=small_freq_grid, time_grid=TimeGrid(fine_dt=0.02), analytic_tail=True)


@pytest.mark.slow
def test_chirp_landscape_peaks_at_zero_and_is_symmetric(landscape_model):
    betas = [-2500.0, -1500.0, -500.0, 0.0, 500.0, 1500.0, 2500.0]
    values = landscape_model.trace(MolecularParams(), betas).values
    assert int(np.argmax(values)) == 3
    assert values[3] > values[4] > values[5] > values[6]
    asymmetry = np.abs(values[2::-1] - values[4:]) / values[3]
    assert np.all(asymmetry <= 0.02)
    assert values[3] == pytest.approx(705.0, rel=0.02)


@pytest.mark.slow
def test_full_chirp_grid_maximum_sits_on_zero(landscape_model):
    betas = beta_grid()
    trace = landscape_model.trace(MolecularParams(), betas)
    assert betas[int(np.argmax(trace.values))] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
def test_delay_trace_maximum_below_fifty_fs(landscape_model):
    taus = [0.0, 25.0, 50.0, 100.0, 150.0, 200.0]
    delays = landscape_model.tau_trace(MolecularParams(), taus)
    assert delays.taus[int(np.argmax(delays.values))] < 50.0
    assert delays.values[0] > delays.values[3]


@pytest.mark.slow
def test_control_surface_maximum_at_unshaped_pulse(landscape_model):
    surface = landscape_model.surface(MolecularParams(), [-1000.0, 0.0, 1000.0], [0.0, 50.0, 100.0])
    i_tau, i_beta = np.unravel_index(np.argmax(surface.rho11), surface.rho11.shape)
    assert surface.taus[i_tau] == 0.0 and surface.betas[i_beta] == 0.0
