"""Photoluminescence forward model: steady S1 population -> counts per second."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import DomainError, ShapeMismatchError, ValidationError
from ..core.types import MolecularParams, PLScaling, PulseSpec, TimeGrid
from .field_shaper import FrequencyGrid, cached_field
from .lindblad_engine import steady_populations

POPULATION_SLACK = 1e-6

_log = logger.bind(component="pl_forward")


def pl_value(rho11, scaling: PLScaling):
    """PL = A rho11 + B. Accepts scalars or arrays."""
    rho = np.asarray(rho11, dtype=float)
    if np.any(rho < -POPULATION_SLACK) or np.any(rho > 1.0 + POPULATION_SLACK):
        raise DomainError("rho11 outside [0, 1]", {"min": float(rho.min()), "max": float(rho.max())})
    out = scaling.A * np.clip(rho, 0.0, 1.0) + scaling.B
    return float(out) if out.ndim == 0 else out


def beta_grid(n: int = 55, lo: float = -3000.0, hi: float = 3000.0) -> np.ndarray:
    if n < 2 or not lo < hi:
        raise ValidationError("beta grid needs n >= 2 and lo < hi", {"n": n, "lo": lo, "hi": hi})
    return np.linspace(lo, hi, n)


def _strictly_increasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) > 0))


@dataclass
class PLTrace:
    """PL versus chirp at fixed mask delay."""
    betas: np.ndarray
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.betas.shape != self.values.shape or self.betas.ndim != 1:
            raise ShapeMismatchError("betas and values must be 1-D of equal length",
                                     expected=self.betas.shape, got=self.values.shape)
        if not _strictly_increasing(self.betas):
            raise ValidationError("betas must be strictly increasing")

    def __len__(self) -> int:
        return self.values.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"beta_fs2": self.betas, "pl_cps": self.values})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, tau: float = 0.0) -> "PLTrace":
        missing = {"beta_fs2", "pl_cps"} - set(frame.columns)
        if missing:
            raise ValidationError(f"trace table lacks columns {sorted(missing)}")
        return cls(frame["beta_fs2"].to_numpy(), frame["pl_cps"].to_numpy(), tau)


@dataclass
class TauTrace:
    """PL versus mask delay at fixed chirp."""
    taus: np.ndarray
    values: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.taus.shape != self.values.shape:
            raise ShapeMismatchError("taus and values must have equal length",
                                     expected=self.taus.shape, got=self.values.shape)
        if not _strictly_increasing(self.taus):
            raise ValidationError("taus must be strictly increasing")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau_fs": self.taus, "pl_cps": self.values})


@dataclass
class ControlSurface:
    """Steady rho11 over the (tau, beta) control plane; rows are taus."""
    betas: np.ndarray
    taus: np.ndarray
    rho11: np.ndarray

    def __post_init__(self):
        self.rho11 = np.asarray(self.rho11, dtype=float)
        if self.rho11.shape != (len(self.taus), len(self.betas)):
            raise ShapeMismatchError("surface shape must be (len(taus), len(betas))",
                                     expected=(len(self.taus), len(self.betas)), got=self.rho11.shape)
        if np.any(self.rho11 < -POPULATION_SLACK) or np.any(self.rho11 > 1 + POPULATION_SLACK):
            raise DomainError("surface entries must lie in [0, 1]")

    def row(self, tau: float) -> np.ndarray:
        index = int(np.flatnonzero(np.isclose(self.taus, tau))[0])
        return self.rho11[index]

    def to_frame(self) -> pd.DataFrame:
        tau_mesh, beta_mesh = np.meshgrid(self.taus, self.betas, indexing="ij")
        return pd.DataFrame({
            "beta_fs2": beta_mesh.ravel(),
            "tau_fs": tau_mesh.ravel(),
            "rho11": self.rho11.ravel(),
        })


def _populations_job(job: Tuple) -> np.ndarray:
    params, specs, time_grid, freq_grid, rotating_wave, analytic_tail = job
    fields = [cached_field(spec, freq_grid) for spec in specs]
    return steady_populations(params, fields, time_grid, rotating_wave, analytic_tail)


def _chunks(n: int, parts: int) -> List[slice]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


@dataclass(frozen=True)
class ForwardModel:
    """Pulse, integration settings and PL scaling bundled behind one interface.

    ``trace(params, betas)`` is the seam used by the fitter and the dataset
    factory; any object offering it can stand in for the physics.
    """
    pulse: PulseSpec = field(default_factory=PulseSpec)
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    freq_grid: FrequencyGrid = field(default_factory=FrequencyGrid.for_time_step)
    scaling: PLScaling = field(default_factory=PLScaling)
    rotating_wave: bool = False
    analytic_tail: bool = False
    workers: int = 1

    def populations(self, params: Sequence[MolecularParams], specs: Sequence[PulseSpec]) -> np.ndarray:
        """rho11(t_final) per (params, spec) pair, in input order."""
        params, specs = list(params), list(specs)
        if len(params) != len(specs):
            raise ShapeMismatchError("params and specs must pair up",
                                     expected=(len(params),), got=(len(specs),))
        jobs = [
            (params[s], specs[s], self.time_grid, self.freq_grid, self.rotating_wave, self.analytic_tail)
            for s in _chunks(len(params), self.workers)
        ]
        if self.workers <= 1 or len(jobs) <= 1:
            parts = [_populations_job(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                parts = list(pool.map(_populations_job, jobs))
        return np.concatenate(parts) if parts else np.zeros(0)

    def beta_populations(self, params_rows: Sequence[MolecularParams], betas: Sequence[float],
                         tau: float = 0.0) -> np.ndarray:
        """rho11 matrix (rows x betas), one batch for all rows."""
        betas = np.asarray(betas, dtype=float)
        specs = [self.pulse.with_controls(b, tau) for b in betas]
        flat_params = [p for p in params_rows for _ in betas]
        flat_specs = specs * len(params_rows)
        return self.populations(flat_params, flat_specs).reshape(len(params_rows), betas.size)

    def trace(self, params: MolecularParams, betas: Sequence[float], tau: float = 0.0) -> PLTrace:
        rho = self.beta_populations([params], betas, tau)[0]
        return PLTrace(np.asarray(betas, dtype=float), pl_value(rho, self.scaling), tau)

    def traces(self, params_rows: Sequence[MolecularParams], betas: Sequence[float]) -> np.ndarray:
        """PL matrix (rows x betas)."""
        return pl_value(self.beta_populations(params_rows, betas), self.scaling)

    def tau_trace(self, params: MolecularParams, taus: Sequence[float], beta: float = 0.0) -> TauTrace:
        taus = np.asarray(taus, dtype=float)
        specs = [self.pulse.with_controls(beta, t) for t in taus]
        rho = self.populations([params] * taus.size, specs)
        return TauTrace(taus, pl_value(rho, self.scaling), beta)

    def surface(self, params: MolecularParams, betas: Sequence[float], taus: Sequence[float]) -> ControlSurface:
        betas = np.asarray(betas, dtype=float)
        taus = np.asarray(taus, dtype=float)
        specs = [self.pulse.with_controls(b, t) for t in taus for b in betas]
        _log.info(f"Control surface over {taus.size} x {betas.size} pulses")
        rho = self.populations([params] * len(specs), specs)
        return ControlSurface(betas, taus, rho.reshape(taus.size, betas.size))


def beta_trace(params: MolecularParams, scaling: PLScaling, betas: Sequence[float],
               model: Optional[ForwardModel] = None) -> PLTrace:
    """PL at each beta with tau = 0."""
    model = model or ForwardModel()
    if model.scaling != scaling:
        model = replace(model, scaling=scaling)
    return model.trace(params, betas)


def tau_trace(params: MolecularParams, scaling: PLScaling, taus: Sequence[float],
              model: Optional[ForwardModel] = None) -> TauTrace:
    """PL at each tau with beta = 0."""
    model = model or ForwardModel(scaling=scaling)
    if model.scaling != scaling:
        model = replace(model, scaling=scaling)
    return model.tau_trace(params, taus)


def control_surface(params: MolecularParams, betas: Sequence[float], taus: Sequence[float],
                    model: Optional[ForwardModel] = None) -> ControlSurface:
    return (model or ForwardModel()).surface(params, betas, taus)
