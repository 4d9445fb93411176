"""Common type definitions for the PL toolkit."""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import ValidationError


class ScalerKind(str, Enum):
    """Feature/target scaling pipelines."""
    STANDARD = "standard"
    ROBUST = "robust"
    ROBUST_WINSOR = "robust+winsor"


class Scenario(str, Enum):
    """Which parameters the simplex fitter treats as free."""
    FREE_E2 = "free_e2"      # Q = [E2, Omega2P, gamma2, Gamma12]
    FIXED_E2 = "fixed_e2"    # Q = [Omega2P, gamma2, Gamma12]


class Command(str, Enum):
    """CLI subcommands."""
    SIMULATE = "simulate"
    PULSE = "pulse"
    TRACE = "trace"
    SURFACE = "surface"
    GEN_DATASET = "gen-dataset"
    FIT = "fit"
    LAMBDA_SCAN = "lambda-scan"
    TRAIN = "train"
    EVALUATE = "evaluate"
    PREDICT = "predict"
    SWEEP_ARCH = "sweep-arch"
    HYPER_GRID = "hyper-grid"
    SWEEP_DROPOUT = "sweep-dropout"


def _require(condition: bool, message: str, **details) -> None:
    if not condition:
        raise ValidationError(message, details)


@dataclass(frozen=True)
class PulseSpec:
    """Laser spectrum plus the two shaping controls."""
    center_wavenumber: float = 12987.0   # cm^-1
    fwhm_wavenumber: float = 400.0       # cm^-1, FWHM of the intensity spectrum |A|^2
    beta: float = 0.0                    # fs^2
    tau: float = 0.0                     # fs

    def __post_init__(self):
        _require(self.center_wavenumber > 0, "center_wavenumber must be positive",
                 value=self.center_wavenumber)
        _require(self.fwhm_wavenumber > 0, "fwhm_wavenumber must be positive",
                 value=self.fwhm_wavenumber)
        _require(math.isfinite(self.beta) and math.isfinite(self.tau),
                 "beta and tau must be finite", beta=self.beta, tau=self.tau)

    def with_controls(self, beta: float = 0.0, tau: float = 0.0) -> "PulseSpec":
        """Same spectrum, different shaping."""
        return replace(self, beta=float(beta), tau=float(tau))

    @property
    def unmodulated(self) -> "PulseSpec":
        return self.with_controls(0.0, 0.0)


@dataclass(frozen=True)
class MolecularParams:
    """Three-level molecule. Energies in cm^-1, rates in fs^-1."""
    E0: float = 0.0
    E1: float = 22000.0
    E2: float = 25940.0
    omega_2p: float = 531.0
    gamma2: float = 1.0 / 61.0
    Gamma12: float = 1.0 / 190.0

    def __post_init__(self):
        _require(self.E0 < self.E1 < self.E2, "energies must satisfy E0 < E1 < E2",
                 E0=self.E0, E1=self.E1, E2=self.E2)
        # omega_2p == 0 is the dark reference case used throughout the tests
        _require(self.omega_2p >= 0, "omega_2p must be non-negative", value=self.omega_2p)
        _require(self.gamma2 >= 0, "gamma2 must be non-negative", value=self.gamma2)
        _require(self.Gamma12 >= 0, "Gamma12 must be non-negative", value=self.Gamma12)

    def with_estimate(self, omega_2p: float, gamma2: float, Gamma12: float,
                      E2: Optional[float] = None) -> "MolecularParams":
        return replace(
            self,
            omega_2p=float(omega_2p),
            gamma2=float(gamma2),
            Gamma12=float(Gamma12),
            E2=float(E2) if E2 is not None else self.E2,
        )

    @property
    def targets(self) -> np.ndarray:
        """[Omega2P, gamma2, Gamma12] as predicted by the regressor."""
        return np.array([self.omega_2p, self.gamma2, self.Gamma12])


@dataclass(frozen=True)
class PLScaling:
    """Affine map from steady S1 population to counts per second."""
    A: float = 742.88
    B: float = 43.73

    def __post_init__(self):
        _require(self.A > 0, "A must be positive", value=self.A)
        _require(self.B >= 0, "B must be non-negative", value=self.B)


@dataclass(frozen=True)
class TimeGrid:
    """Integration window. t_pulse_end=None means derive it from the field."""
    t_start: float = -100.0
    t_final: float = 1000.0
    fine_dt: float = 0.01
    coarse_dt: float = 1.0
    t_pulse_end: Optional[float] = None
    store_fine_every: float = 1.0
    store_coarse_every: float = 10.0
    min_pulse_end: float = 300.0

    def __post_init__(self):
        _require(self.t_start < self.t_final, "t_start must precede t_final",
                 t_start=self.t_start, t_final=self.t_final)
        _require(0 < self.fine_dt <= 0.02, "fine_dt must lie in (0, 0.02] fs", value=self.fine_dt)
        _require(self.coarse_dt > 0, "coarse_dt must be positive", value=self.coarse_dt)
        if self.t_pulse_end is not None:
            _require(self.t_start < self.t_pulse_end < self.t_final,
                     "t_pulse_end must lie strictly inside (t_start, t_final)",
                     t_pulse_end=self.t_pulse_end)


@dataclass(frozen=True)
class ParamRanges:
    """Physical sampling box for the estimation targets."""
    omega_2p: Tuple[float, float] = (200.0, 800.0)
    gamma2: Tuple[float, float] = (0.005, 0.05)
    Gamma12: Tuple[float, float] = (0.002, 0.01)
    E2: Tuple[float, float] = (22000.0, 30000.0)

    def __post_init__(self):
        for name in ("omega_2p", "gamma2", "Gamma12", "E2"):
            lo, hi = getattr(self, name)
            _require(lo <= hi, f"range {name} has lo > hi", lo=lo, hi=hi)

    def bounds(self, include_E2: bool) -> Tuple[np.ndarray, np.ndarray]:
        """Lower/upper bound vectors in parameter-vector order."""
        rows = [self.omega_2p, self.gamma2, self.Gamma12]
        if include_E2:
            rows = [self.E2] + rows
        arr = np.asarray(rows, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy()

    def contains(self, q: np.ndarray, include_E2: bool) -> bool:
        lo, hi = self.bounds(include_E2)
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= lo) and np.all(q <= hi))


@dataclass(frozen=True)
class FitSettings:
    """Nelder-Mead and ensemble settings."""
    lam: float = 1e-2
    maxiter: int = 500
    ftol: float = 1e-4
    n_starts: int = 700
    initial_step: float = 0.05
    barrier_weight: float = 1e6

    def __post_init__(self):
        _require(self.maxiter >= 1, "maxiter must be at least 1", value=self.maxiter)
        _require(self.ftol > 0, "ftol must be positive", value=self.ftol)
        _require(self.lam >= 0, "lambda must be non-negative", value=self.lam)
        _require(self.n_starts >= 1, "n_starts must be at least 1", value=self.n_starts)


@dataclass(frozen=True)
class NetworkConfig:
    """Feed-forward architecture."""
    hidden_sizes: Tuple[int, ...] = (128, 64, 32)
    dropout_p: float = 0.0
    seed: int = 0
    input_width: int = 55
    output_width: int = 3

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        _require(all(h >= 1 for h in self.hidden_sizes), "hidden sizes must be >= 1",
                 hidden_sizes=self.hidden_sizes)
        _require(0.0 <= self.dropout_p < 1.0, "dropout_p must lie in [0, 1)", value=self.dropout_p)
        _require(self.input_width >= 1 and self.output_width >= 1, "layer widths must be >= 1")

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (self.input_width, *self.hidden_sizes, self.output_width)


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch Adam training schedule. patience=0 disables early stopping."""
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-4
    patience: int = 30
    seed: int = 0

    def __post_init__(self):
        _require(self.epochs >= 1, "epochs must be positive", value=self.epochs)
        _require(self.batch_size >= 1, "batch_size must be positive", value=self.batch_size)
        _require(self.learning_rate > 0, "learning_rate must be positive", value=self.learning_rate)
        _require(0 <= self.patience <= self.epochs, "patience must lie in [0, epochs]",
                 value=self.patience)


# Parameter-vector column names, in order
TARGET_NAMES: Tuple[str, ...] = ("omega_2p", "gamma2", "Gamma12")
FREE_E2_NAMES: Tuple[str, ...] = ("E2",) + TARGET_NAMES

# Artifact column names for the targets
TARGET_COLUMNS: Dict[str, str] = {
    "omega_2p": "omega2p_cm1",
    "gamma2": "gamma2_fs1",
    "Gamma12": "gamma12_fs1",
}
