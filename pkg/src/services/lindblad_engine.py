"""Three-level Lindblad dynamics driven by a shaped pulse.

Units inside this module: rad/fs for energies (hbar = 1), fs for time.

The pulse drives the 0-2 transition with -Omega_2P * TWO_PHOTON_DRIVE * Re{E(t)^2},
E normalized to unit peak. The 1/sqrt(2) gives the unshaped 400 cm^-1 pulse
the two-photon area of a real field whose width is read on the amplitude
spectrum; with Omega_2P = 531 cm^-1 the unshaped pulse then leaves about 0.9 of
the population in S1, and any chirp leaves less.

The integration runs in two segments per element:
  * the pulse window [t_start, t_pulse_end] with fixed-step RK4 at fine_dt on
    the full equation (no rotating-wave approximation unless asked for). The
    state never leaves span{|0><0|, |1><1|, |2><2|, |0><2|, |2><0|}, so each
    RK4 step is a 5x5 map built for a whole chunk of steps at once;
  * the field-free tail up to t_final at coarse_dt. There the Hamiltonian is
    diagonal and commutes with both dissipators' free evolution, so the tail
    is integrated in the interaction picture, where only the slow dissipative
    part remains, and rotated back when stored.

Elements of a batch are independent: every arithmetic step is per-element,
and each element leaves the fine loop at its own pulse end.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import IntegrationError, ValidationError
from ..core.types import MolecularParams, PulseSpec, TimeGrid
from .field_shaper import (
    FieldTable,
    FrequencyGrid,
    cached_field,
    pulse_end_time,
    to_angular_frequency,
)

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
EIGENVALUE_TOL = -1e-8
CHUNK_STEPS = 512
TWO_PHOTON_DRIVE = 1.0 / math.sqrt(2.0)

# |1><2|: relaxation S2 -> S1
RELAXATION_JUMP = np.zeros((3, 3))
RELAXATION_JUMP[1, 2] = 1.0
# |2><2|: pure dephasing of S2
DEPHASING_JUMP = np.zeros((3, 3))
DEPHASING_JUMP[2, 2] = 1.0

# density-matrix elements reachable from |0><0|
SUBSPACE = ((0, 0), (1, 1), (2, 2), (0, 2), (2, 0))
_ROWS = np.array([i for i, _ in SUBSPACE])
_COLS = np.array([j for _, j in SUBSPACE])

_log = logger.bind(component="lindblad_engine")


def ground_state() -> np.ndarray:
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def hamiltonian(params: MolecularParams, re_E_sq: float) -> np.ndarray:
    """H(t) in rad/fs for a given drive value.

    The integrator passes TWO_PHOTON_DRIVE * Re{E(t)^2} as ``re_E_sq``.
    """
    energies = to_angular_frequency(np.array([params.E0, params.E1, params.E2], dtype=float))
    H = np.diag(energies)
    coupling = -to_angular_frequency(params.omega_2p) * re_E_sq
    H[0, 2] = coupling
    H[2, 0] = coupling
    return H


def _dissipator(rho: np.ndarray, jump: np.ndarray, rate) -> np.ndarray:
    jump_dag = jump.conj().T
    jdj = jump_dag @ jump
    rate = np.asarray(rate, dtype=float)[..., None, None]
    return rate * (jump @ rho @ jump_dag - 0.5 * (jdj @ rho + rho @ jdj))


def _rhs(rho: np.ndarray, H: np.ndarray, gamma2, Gamma12) -> np.ndarray:
    # D_2 as written carries gamma2/2 in front, i.e. a |2><2| jump at rate gamma2/2,
    # which decays rho02 and rho12 at gamma2/4.
    drho = -1j * (H @ rho - rho @ H)
    drho = drho + _dissipator(rho, RELAXATION_JUMP, Gamma12)
    drho = drho + _dissipator(rho, DEPHASING_JUMP, 0.5 * np.asarray(gamma2, dtype=float))
    return drho


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, params: MolecularParams) -> np.ndarray:
    """d rho / dt for one density matrix (or a stack of them sharing params)."""
    return _rhs(np.asarray(rho, dtype=complex), np.asarray(H, dtype=complex),
                params.gamma2, params.Gamma12)


def _liouvillian(H: np.ndarray, gamma2, Gamma12) -> np.ndarray:
    """Matrix of rho -> _rhs(rho, H) on SUBSPACE, one 5x5 block per stacked H."""
    H = np.asarray(H, dtype=complex)
    size = H.shape[0]
    L = np.empty((size, len(SUBSPACE), len(SUBSPACE)), dtype=complex)
    for col, (i, j) in enumerate(SUBSPACE):
        unit = np.zeros((size, 3, 3), dtype=complex)
        unit[:, i, j] = 1.0
        L[:, :, col] = _rhs(unit, H, gamma2, Gamma12)[:, _ROWS, _COLS]
    return L


def _unit_coupling(i: int, j: int) -> np.ndarray:
    H = np.zeros((1, 3, 3), dtype=complex)
    H[0, i, j] = 1.0
    return H


# the Liouvillian is L0 + c L_UP + conj(c) L_DOWN for H[0,2] = c
_L_UP = _liouvillian(_unit_coupling(0, 2), 0.0, 0.0)[0]
_L_DOWN = _liouvillian(_unit_coupling(2, 0), 0.0, 0.0)[0]


def _to_matrix(y: np.ndarray) -> np.ndarray:
    rho = np.zeros(y.shape[:-1] + (3, 3), dtype=complex)
    rho[..., _ROWS, _COLS] = y
    return rho


def check_state(rho: np.ndarray, time_fs: float) -> None:
    """Raise IntegrationError if any matrix in the stack breaks the invariants."""
    rho = np.asarray(rho)
    herm_defect = np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))
    trace_defect = np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0))
    min_eig = np.min(np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))))
    if not (np.isfinite(herm_defect) and np.isfinite(trace_defect)):
        raise IntegrationError(f"non-finite density matrix at t = {time_fs:.3f} fs", time_fs)
    if herm_defect > HERMITICITY_TOL:
        raise IntegrationError(
            f"density matrix lost Hermiticity ({herm_defect:.2e}) at t = {time_fs:.3f} fs", time_fs)
    if trace_defect > TRACE_TOL:
        raise IntegrationError(
            f"trace drifted by {trace_defect:.2e} at t = {time_fs:.3f} fs", time_fs)
    if min_eig < EIGENVALUE_TOL:
        raise IntegrationError(
            f"negative eigenvalue {min_eig:.2e} at t = {time_fs:.3f} fs", time_fs)


@dataclass
class Trajectory:
    """Stored density matrices of one run."""
    times: np.ndarray
    states: np.ndarray
    t_pulse_end: float

    def population(self, level: int) -> np.ndarray:
        return self.states[:, level, level].real

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t_fs": self.times,
            "rho00": self.population(0),
            "rho11": self.population(1),
            "rho22": self.population(2),
            "re_rho02": self.states[:, 0, 2].real,
            "im_rho02": self.states[:, 0, 2].imag,
        })


class _Batch:
    """Per-element constants of one batched integration."""

    def __init__(self, params: Sequence[MolecularParams], fields: Sequence[FieldTable],
                 grid: TimeGrid, rotating_wave: bool):
        if len(params) != len(fields):
            raise ValidationError("params and fields must pair up",
                                  {"params": len(params), "fields": len(fields)})
        self.size = len(params)
        self.grid = grid
        self.rotating_wave = rotating_wave
        energies = to_angular_frequency(
            np.array([[p.E0, p.E1, p.E2] for p in params], dtype=float))
        if rotating_wave:
            energies[:, 2] -= 2.0 * np.array([f.carrier for f in fields])
        self.energies = energies
        self.omega = to_angular_frequency(np.array([p.omega_2p for p in params], dtype=float))
        self.gamma2 = np.array([p.gamma2 for p in params], dtype=float)
        self.Gamma12 = np.array([p.Gamma12 for p in params], dtype=float)
        self.H0 = np.zeros((self.size, 3, 3), dtype=complex)
        self.H0[:, [0, 1, 2], [0, 1, 2]] = energies
        self.L0 = _liouvillian(self.H0, self.gamma2, self.Gamma12)
        self.drive = TWO_PHOTON_DRIVE * self.omega

        if grid.t_pulse_end is not None:
            ends = np.full(self.size, grid.t_pulse_end)
        else:
            ends = np.array([pulse_end_time(f, minimum=grid.min_pulse_end) for f in fields])
        ends = np.minimum(ends, grid.t_final - grid.coarse_dt)
        self.n_fine = np.ceil((ends - grid.t_start) / grid.fine_dt - 1e-9).astype(int)
        self.t_pulse_end = grid.t_start + self.n_fine * grid.fine_dt
        self.fields = [
            f.window(grid.t_start, grid.t_start + n * grid.fine_dt)
            for f, n in zip(fields, self.n_fine)
        ]

    def couplings(self, members: np.ndarray, k0: int, k1: int) -> np.ndarray:
        """H[0,2] at times t_start + (k0 + j/2) fine_dt, j = 0 .. 2(k1-k0)."""
        grid = self.grid
        times = grid.t_start + grid.fine_dt * (k0 + 0.5 * np.arange(2 * (k1 - k0) + 1))
        out = np.empty((members.size, times.size), dtype=complex)
        for row, idx in enumerate(members):
            table = self.fields[idx]
            if self.rotating_wave:
                envelope = table.envelope_at(times)
                out[row] = -0.5 * self.drive[idx] * np.conj(envelope ** 2)
            else:
                out[row] = -self.drive[idx] * np.real(table.at(times) ** 2)
        return out


def _rk4_propagators(L0: np.ndarray, couplings: np.ndarray, dt: float) -> np.ndarray:
    """One-step RK4 maps for a chunk of s steps.

    ``couplings`` holds H[0,2] at whole and half steps, shape (m, 2s+1);
    returns (m, s, 5, 5).
    """
    c = couplings[..., None, None]
    A = L0[:, None] + c * _L_UP + np.conj(c) * _L_DOWN
    A_start, A_mid, A_end = A[:, 0:-1:2], A[:, 1::2], A[:, 2::2]
    eye = np.eye(len(SUBSPACE))
    k1 = A_start
    k2 = A_mid @ (eye + 0.5 * dt * k1)
    k3 = A_mid @ (eye + 0.5 * dt * k2)
    k4 = A_end @ (eye + dt * k3)
    return eye + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_free(rho, dt, gamma2, Gamma12):
    # interaction picture: H drops out, only the dissipators remain
    zero = np.zeros_like(rho)
    dt = np.asarray(dt, dtype=float)[..., None, None]
    k1 = _rhs(rho, zero, gamma2, Gamma12)
    k2 = _rhs(rho + 0.5 * dt * k1, zero, gamma2, Gamma12)
    k3 = _rhs(rho + 0.5 * dt * k2, zero, gamma2, Gamma12)
    k4 = _rhs(rho + dt * k3, zero, gamma2, Gamma12)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _to_lab_frame(rho_int: np.ndarray, energies: np.ndarray, elapsed) -> np.ndarray:
    gaps = energies[..., :, None] - energies[..., None, :]
    elapsed = np.asarray(elapsed, dtype=float)[..., None, None]
    return rho_int * np.exp(-1j * gaps * elapsed)


def _integrate_pulse(batch: _Batch, record: Optional[List] = None) -> np.ndarray:
    """Fine RK4 over each element's pulse window; returns rho at its pulse end."""
    grid = batch.grid
    dt = grid.fine_dt
    store_every = max(int(round(grid.store_fine_every / dt)), 1)
    y = np.zeros((batch.size, len(SUBSPACE)), dtype=complex)
    y[:, 0] = 1.0
    if record is not None:
        record.append((grid.t_start, _to_matrix(y[0])))

    active = np.arange(batch.size)
    k = 0
    for boundary in np.unique(batch.n_fine):
        y_a = y[active]
        L0_a = batch.L0[active]
        while k < boundary:
            k_stop = min(k + CHUNK_STEPS, boundary)
            steps = _rk4_propagators(L0_a, batch.couplings(active, k, k_stop), dt)
            for j in range(k_stop - k):
                y_a = (steps[:, j] @ y_a[..., None])[..., 0]
                step = k + j + 1
                if step % store_every == 0 or step == boundary:
                    t = grid.t_start + step * dt
                    rho_a = _to_matrix(y_a)
                    check_state(rho_a, t)
                    if record is not None:
                        record.append((t, rho_a[0]))
            k = k_stop
        y[active] = y_a
        active = active[batch.n_fine[active] > boundary]
        if active.size == 0:
            break
    return _to_matrix(y)


def _integrate_tail(batch: _Batch, rho_end: np.ndarray, record: Optional[List] = None) -> np.ndarray:
    """Coarse RK4 of the field-free tail, interaction picture; returns lab-frame rho(t_final)."""
    grid = batch.grid
    remaining = grid.t_final - batch.t_pulse_end
    n_coarse = np.maximum(np.ceil(remaining / grid.coarse_dt - 1e-9).astype(int), 1)
    dts = remaining / n_coarse
    rho = rho_end.copy()

    active = np.arange(batch.size)
    k = 0
    for boundary in np.unique(n_coarse):
        rho_a = rho[active]
        g2_a, G12_a, dt_a = batch.gamma2[active], batch.Gamma12[active], dts[active]
        if record is not None:
            store_every = max(int(round(grid.store_coarse_every / dt_a[0])), 1)
        while k < boundary:
            rho_a = _rk4_free(rho_a, dt_a, g2_a, G12_a)
            k += 1
            if record is not None and (k % store_every == 0 or k == boundary):
                elapsed = k * dt_a[0]
                lab = _to_lab_frame(rho_a[0], batch.energies[active[0]], elapsed)
                check_state(lab, batch.t_pulse_end[active[0]] + elapsed)
                record.append((batch.t_pulse_end[active[0]] + elapsed, lab))
        rho[active] = rho_a
        active = active[n_coarse[active] > boundary]
        if active.size == 0:
            break
    final = _to_lab_frame(rho, batch.energies, remaining)
    check_state(final, grid.t_final)
    return final


def evolve(params: MolecularParams, field: FieldTable, grid: TimeGrid = TimeGrid(),
           rotating_wave: bool = False) -> Trajectory:
    """Integrate from the ground state at t_start to t_final, storing the path.

    Stored every ``store_fine_every`` fs in the pulse window and every
    ``store_coarse_every`` fs afterwards.
    """
    batch = _Batch([params], [field], grid, rotating_wave)
    record: List = []
    rho_end = _integrate_pulse(batch, record)
    _integrate_tail(batch, rho_end, record)
    times = np.array([t for t, _ in record])
    states = np.array([s for _, s in record])
    return Trajectory(times=times, states=states, t_pulse_end=float(batch.t_pulse_end[0]))


def steady_populations(params: Sequence[MolecularParams], fields: Sequence[FieldTable],
                       grid: TimeGrid = TimeGrid(), rotating_wave: bool = False,
                       analytic_tail: bool = False) -> np.ndarray:
    """rho11(t_final) for each (params, field) pair, integrated as one batch."""
    if len(params) == 0:
        return np.zeros(0)
    batch = _Batch(list(params), list(fields), grid, rotating_wave)
    _log.debug(f"Integrating batch of {batch.size} up to {batch.t_pulse_end.max():.1f} fs pulse end")
    rho_end = _integrate_pulse(batch)
    if analytic_tail:
        remaining = grid.t_final - batch.t_pulse_end
        rho11 = rho_end[:, 1, 1].real
        rho22 = rho_end[:, 2, 2].real
        return rho11 + rho22 * (1.0 - np.exp(-batch.Gamma12 * remaining))
    return _integrate_tail(batch, rho_end)[:, 1, 1].real


def steady_population(params: MolecularParams, spec: PulseSpec, grid: TimeGrid = TimeGrid(),
                      freq_grid: Optional[FrequencyGrid] = None, rotating_wave: bool = False,
                      analytic_tail: bool = False) -> float:
    """rho11 at t_final for one molecule and one shaped pulse."""
    field = cached_field(spec, freq_grid or FrequencyGrid.for_time_step())
    value = steady_populations([params], [field], grid, rotating_wave, analytic_tail)[0]
    if not math.isfinite(value):
        raise IntegrationError("steady population is not finite", grid.t_final)
    return float(value)
