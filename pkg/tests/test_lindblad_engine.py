import numpy as np
import pytest

from src.core.exceptions import IntegrationError, ValidationError
from src.core.types import MolecularParams, PulseSpec, TimeGrid
from src.services.field_shaper import cached_field, to_angular_frequency
from src.services.lindblad_engine import (
    SUBSPACE,
    TWO_PHOTON_DRIVE,
    _Batch,
    _liouvillian,
    _rk4_propagators,
    _to_matrix,
    check_state,
    evolve,
    ground_state,
    hamiltonian,
    lindblad_rhs,
    steady_population,
    steady_populations,
)


def _random_density_matrix(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def tiny_grid():
    return TimeGrid(t_start=-100.0, t_final=400.0, fine_dt=0.02, t_pulse_end=100.0)


def test_hamiltonian_layout():
    params = MolecularParams()
    H = hamiltonian(params, 0.5)
    np.testing.assert_allclose(np.diag(H), to_angular_frequency(np.array([0.0, 22000.0, 25940.0])))
    assert H[0, 2] == H[2, 0] == pytest.approx(-0.5 * to_angular_frequency(531.0))
    assert H[0, 1] == H[1, 2] == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rhs_preserves_trace_and_hermiticity(seed):
    rho = _random_density_matrix(seed)
    H = hamiltonian(MolecularParams(), 0.3)
    drho = lindblad_rhs(rho, H, MolecularParams())
    assert abs(np.trace(drho)) < 1e-14
    np.testing.assert_allclose(drho, drho.conj().T, atol=1e-14)


def test_relaxation_feeds_s1_from_s2():
    rho = np.zeros((3, 3), dtype=complex)
    rho[2, 2] = 1.0
    params = MolecularParams(omega_2p=0.0)
    drho = lindblad_rhs(rho, np.zeros((3, 3)), params)
    assert drho[1, 1].real == pytest.approx(params.Gamma12)
    assert drho[2, 2].real == pytest.approx(-params.Gamma12)


def test_dephasing_rate_on_coherence():
    rho = np.full((3, 3), 0.0, dtype=complex)
    rho[0, 0] = rho[2, 2] = 0.5
    rho[0, 2] = rho[2, 0] = 0.5
    params = MolecularParams(Gamma12=0.0)
    drho = lindblad_rhs(rho, np.zeros((3, 3)), params)
    assert drho[0, 2].real == pytest.approx(-0.25 * params.gamma2 * 0.5)


def test_check_state_accepts_ground_state():
    check_state(ground_state(), 0.0)


@pytest.mark.parametrize("bad, match", [
    (np.diag([1.0, 0.1, 0.0]).astype(complex), "trace"),
    (np.diag([1.1, -0.1, 0.0]).astype(complex), "negative eigenvalue"),
])
def test_check_state_rejects_broken_matrices(bad, match):
    with pytest.raises(IntegrationError, match=match) as info:
        check_state(bad, 12.5)
    assert info.value.time_fs == 12.5


def test_check_state_rejects_non_hermitian():
    rho = ground_state()
    rho[0, 1] = 1e-3
    with pytest.raises(IntegrationError, match="Hermiticity"):
        check_state(rho, 0.0)


def test_params_and_fields_must_pair(small_freq_grid, tiny_grid):
    field = cached_field(PulseSpec(), small_freq_grid)
    with pytest.raises(ValidationError):
        steady_populations([MolecularParams()], [field, field], tiny_grid)


def test_empty_batch():
    assert steady_populations([], []).size == 0


@pytest.mark.slow
def test_dark_molecule_stays_in_ground_state(small_freq_grid, tiny_grid):
    params = MolecularParams(omega_2p=0.0)
    assert steady_population(params, PulseSpec(), tiny_grid, small_freq_grid) == 0.0


@pytest.mark.slow
def test_trajectory_invariants(small_freq_grid, tiny_grid):
    field = cached_field(PulseSpec(beta=500.0), small_freq_grid)
    trajectory = evolve(MolecularParams(), field, tiny_grid)

    assert np.all(np.diff(trajectory.times) > 0)
    assert trajectory.times[0] == tiny_grid.t_start
    assert trajectory.times[-1] == pytest.approx(tiny_grid.t_final)
    traces = np.trace(trajectory.states, axis1=1, axis2=2)
    np.testing.assert_allclose(traces, 1.0, atol=1e-8)
    assert trajectory.population(2).max() > 0.0
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["t_fs", "rho00", "rho11", "rho22", "re_rho02", "im_rho02"]


@pytest.mark.slow
def test_batch_matches_single_runs(small_freq_grid, tiny_grid):
    specs = [PulseSpec(beta=b) for b in (-1000.0, 0.0, 1500.0)]
    params = [MolecularParams(omega_2p=w) for w in (300.0, 531.0, 700.0)]
    fields = [cached_field(s, small_freq_grid) for s in specs]
    batched = steady_populations(params, fields, tiny_grid)
    single = [steady_populations([p], [f], tiny_grid)[0] for p, f in zip(params, fields)]
    np.testing.assert_allclose(batched, single, rtol=1e-10, atol=1e-14)


@pytest.mark.slow
def test_analytic_tail_matches_integrated_tail(small_freq_grid, tiny_grid):
    field = cached_field(PulseSpec(), small_freq_grid)
    integrated = steady_populations([MolecularParams()], [field], tiny_grid)[0]
    analytic = steady_populations([MolecularParams()], [field], tiny_grid, analytic_tail=True)[0]
    assert 0.0 < integrated < 1.0
    assert analytic == pytest.approx(integrated, rel=1e-6)


@pytest.mark.slow
def test_rotating_wave_close_to_full_coupling(small_freq_grid, tiny_grid):
    full = steady_population(MolecularParams(), PulseSpec(), tiny_grid, small_freq_grid)
    rwa = steady_population(MolecularParams(), PulseSpec(), tiny_grid, small_freq_grid, rotating_wave=True)
    assert rwa == pytest.approx(full, abs=0.02)


def test_step_maps_match_direct_rk4():
    params = MolecularParams()
    H0 = hamiltonian(params, 0.0).astype(complex)
    L0 = _liouvillian(H0[None], params.gamma2, params.Gamma12)
    rng = np.random.default_rng(3)
    couplings = 0.05 * (rng.normal(size=(1, 7)) + 1j * rng.normal(size=(1, 7)))
    dt = 0.01
    maps = _rk4_propagators(L0, couplings, dt)
    assert maps.shape == (1, 3, 5, 5)

    def rhs(rho, c):
        H = H0.copy()
        H[0, 2], H[2, 0] = c, np.conj(c)
        return lindblad_rhs(rho, H, params)

    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0], rho[1, 1], rho[2, 2] = 0.5, 0.2, 0.3
    rho[0, 2], rho[2, 0] = 0.1 + 0.2j, 0.1 - 0.2j
    for j in range(3):
        c0, c_mid, c1 = couplings[0, 2 * j], couplings[0, 2 * j + 1], couplings[0, 2 * j + 2]
        k1 = rhs(rho, c0)
        k2 = rhs(rho + 0.5 * dt * k1, c_mid)
        k3 = rhs(rho + 0.5 * dt * k2, c_mid)
        k4 = rhs(rho + dt * k3, c1)
        expected = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y = maps[0, j] @ np.array([rho[i, k] for i, k in SUBSPACE])
        np.testing.assert_allclose(_to_matrix(y), expected, atol=1e-14)
        rho = expected


def test_pulse_couples_through_scaled_field(small_freq_grid, tiny_grid):
    field = cached_field(PulseSpec(), small_freq_grid)
    batch = _Batch([MolecularParams()], [field], tiny_grid, rotating_wave=False)
    # step 5000 of 0.02 fs from -100 fs lands on t = 0, a sample of the table
    coupling = batch.couplings(np.array([0]), 5000, 5001)[0, 0]
    expected = -TWO_PHOTON_DRIVE * to_angular_frequency(531.0) * np.real(field.at(0.0) ** 2)
    assert coupling.real == pytest.approx(float(expected), rel=1e-9)
    assert TWO_PHOTON_DRIVE == pytest.approx(1.0 / np.sqrt(2.0))


def test_level_one_stays_decoupled_without_relaxation(small_freq_grid, tiny_grid):
    field = cached_field(PulseSpec(beta=500.0), small_freq_grid)
    trajectory = evolve(MolecularParams(Gamma12=0.0), field, tiny_grid)
    assert np.max(np.abs(trajectory.states[:, 0, 1])) <= 1e-12
    assert np.max(np.abs(trajectory.states[:, 1, 2])) <= 1e-12
    assert np.max(np.abs(trajectory.population(1))) <= 1e-12
    assert trajectory.population(2).max() > 0.1


@pytest.mark.slow
def test_purity_is_kept_without_dissipation(small_freq_grid):
    grid = TimeGrid(t_start=-100.0, t_final=400.0, fine_dt=0.005, t_pulse_end=100.0)
    field = cached_field(PulseSpec(), small_freq_grid)
    trajectory = evolve(MolecularParams(gamma2=0.0, Gamma12=0.0), field, grid)
    purity = np.einsum("nij,nji->n", trajectory.states, trajectory.states).real
    np.testing.assert_allclose(purity, 1.0, atol=1e-6)
    assert trajectory.population(2).max() > 0.5


@pytest.mark.slow
def test_unshaped_pulse_population_at_reference_parameters():
    rho11 = steady_population(MolecularParams(), PulseSpec())
    assert rho11 == pytest.approx(0.890, abs=0.015)
    assert steady_population(MolecularParams(), PulseSpec(beta=2500.0)) < rho11
