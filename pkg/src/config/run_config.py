"""Run-level scientific configuration.

A RunConfig is built from defaults, an optional JSON file, ``section.key=value``
overrides and finally the dedicated CLI flags. Every section converts to the
frozen domain types in ``src.core.types``.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from ..core.exceptions import ConfigurationError, PLSimError
from ..core.types import (
    FitSettings,
    MolecularParams,
    NetworkConfig,
    ParamRanges,
    PLScaling,
    PulseSpec,
    ScalerKind,
    Scenario,
    TimeGrid,
    TrainConfig,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MoleculeSection(_Section):
    E0: float = 0.0
    E1: float = 22000.0
    E2: float = 25940.0
    omega_2p: float = Field(531.0, ge=0)
    gamma2: float = Field(1.0 / 61.0, ge=0)
    Gamma12: float = Field(1.0 / 190.0, ge=0)

    def to_params(self) -> MolecularParams:
        return MolecularParams(**self.model_dump())


class PulseSection(_Section):
    center_wavenumber: float = Field(12987.0, gt=0)
    fwhm_wavenumber: float = Field(400.0, gt=0)

    def to_spec(self) -> PulseSpec:
        return PulseSpec(**self.model_dump())


class ScalingSection(_Section):
    A: float = Field(742.88, gt=0)
    B: float = Field(43.73, ge=0)

    def to_scaling(self) -> PLScaling:
        return PLScaling(**self.model_dump())


class TimeGridSection(_Section):
    t_start: float = -100.0
    t_final: float = 1000.0
    fine_dt: float = Field(0.01, gt=0, le=0.02)
    coarse_dt: float = Field(1.0, gt=0)
    t_pulse_end: Optional[float] = None
    store_fine_every: float = Field(1.0, gt=0)
    store_coarse_every: float = Field(10.0, gt=0)
    min_pulse_end: float = 300.0

    def to_grid(self) -> TimeGrid:
        return TimeGrid(**self.model_dump())


class FieldGridSection(_Section):
    n: int = Field(2 ** 17, ge=2)
    dt: float = Field(0.04, gt=0)


class SolverSection(_Section):
    rotating_wave: bool = False
    analytic_tail: bool = False


class AxisSection(_Section):
    n: int = Field(55, ge=2)
    lo: float = -3000.0
    hi: float = 3000.0


class RangesSection(_Section):
    omega_2p: Tuple[float, float] = (200.0, 800.0)
    gamma2: Tuple[float, float] = (0.005, 0.05)
    Gamma12: Tuple[float, float] = (0.002, 0.01)
    E2: Tuple[float, float] = (22000.0, 30000.0)

    def to_ranges(self) -> ParamRanges:
        return ParamRanges(**self.model_dump())


class DatasetSection(_Section):
    n: int = Field(10000, ge=1)
    rows_per_job: int = Field(8, ge=1)
    scaler: ScalerKind = ScalerKind.STANDARD
    winsor_lo_pct: float = Field(1.0, ge=0, le=100)
    winsor_hi_pct: float = Field(99.0, ge=0, le=100)

    @property
    def winsor_pct(self) -> Tuple[float, float]:
        return self.winsor_lo_pct, self.winsor_hi_pct


class FitSection(_Section):
    scenario: Scenario = Scenario.FREE_E2
    lam: float = Field(1e-2, ge=0)
    maxiter: int = Field(500, ge=1)
    ftol: float = Field(1e-4, gt=0)
    n_starts: int = Field(700, ge=1)
    initial_step: float = Field(0.05, gt=0)
    barrier_weight: float = Field(1e6, ge=0)
    two_photon_reference: float = 25940.0
    bins: int = Field(30, ge=1)
    lambdas: List[float] = Field(default_factory=lambda: [1e-2, 1e-3])

    def to_settings(self) -> FitSettings:
        return FitSettings(self.lam, self.maxiter, self.ftol, self.n_starts, self.initial_step,
                           self.barrier_weight)


class NetworkSection(_Section):
    hidden_sizes: List[int] = Field(default_factory=lambda: [128, 64, 32])
    dropout_p: float = Field(0.0, ge=0, lt=1)


class TrainSection(_Section):
    epochs: int = Field(500, ge=1)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    patience: int = Field(30, ge=0)


class SweepSection(_Section):
    arch_ids: List[int] = Field(default_factory=lambda: list(range(1, 19)))
    bags: int = Field(10, ge=1)
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(256, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    patience: int = Field(30, ge=0)


class GridSection(_Section):
    batch_sizes: List[int] = Field(default_factory=lambda: [64, 128, 256, 512])
    learning_rates: List[float] = Field(default_factory=lambda: [1.0, 1e-1, 1e-2, 1e-3, 1e-4])
    epochs: int = Field(200, ge=1)
    patience: int = Field(30, ge=0)


class DropoutSection(_Section):
    rates: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.5])
    epochs: int = Field(500, ge=1)
    patience: int = Field(0, ge=0)


class RunConfig(_Section):
    molecule: MoleculeSection = Field(default_factory=MoleculeSection)
    pulse: PulseSection = Field(default_factory=PulseSection)
    scaling: ScalingSection = Field(default_factory=ScalingSection)
    time_grid: TimeGridSection = Field(default_factory=TimeGridSection)
    field_grid: FieldGridSection = Field(default_factory=FieldGridSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    betas: AxisSection = Field(default_factory=AxisSection)
    taus: AxisSection = Field(default_factory=lambda: AxisSection(n=31, lo=0.0, hi=300.0))
    ranges: RangesSection = Field(default_factory=RangesSection)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    fit: FitSection = Field(default_factory=FitSection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    train: TrainSection = Field(default_factory=TrainSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    grid: GridSection = Field(default_factory=GridSection)
    dropout: DropoutSection = Field(default_factory=DropoutSection)
    seed: int = 0
    workers: int = Field(1, ge=1)
    out: str = "runs"

    def network_config(self, input_width: int = None) -> NetworkConfig:
        return NetworkConfig(
            hidden_sizes=tuple(self.network.hidden_sizes),
            dropout_p=self.network.dropout_p,
            seed=self.seed,
            input_width=input_width or self.betas.n,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **self.train.model_dump())

    def echo(self) -> Dict[str, Any]:
        """The effective configuration as plain JSON values."""
        return self.model_dump(mode="json")

    def check_domain(self) -> None:
        """Build every domain object once so their invariants are enforced up front."""
        checks = {
            "molecule": self.molecule.to_params,
            "pulse": self.pulse.to_spec,
            "scaling": self.scaling.to_scaling,
            "time_grid": self.time_grid.to_grid,
            "ranges": self.ranges.to_ranges,
            "fit": self.fit.to_settings,
            "network": self.network_config,
            "train": self.train_config,
        }
        for section, build in checks.items():
            try:
                build()
            except PLSimError as e:
                raise ConfigurationError(f"{section}: {e.message}", {"key": section, **e.details})
        if self.dataset.winsor_lo_pct >= self.dataset.winsor_hi_pct:
            raise ConfigurationError("dataset.winsor_lo_pct: must be below winsor_hi_pct",
                                     {"key": "dataset.winsor_lo_pct"})


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: Dict[str, Any], assignment: str) -> None:
    """Set ``section.key=value`` in the raw config mapping."""
    key, sep, value = assignment.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigurationError(f"override '{assignment}' is not of the form section.key=value")
    parts = key.split(".")
    node = raw
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"{key}: '{part}' is not a section", {"key": key})
        node = child
    node[parts[-1]] = _parse_value(value.strip())


def _key_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_config(path: Optional[str] = None, overrides: Sequence[str] = (), seed: Optional[int] = None,
                 workers: Optional[int] = None, out: Optional[str] = None,
                 defaults: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults, then the JSON file, then overrides, then flags."""
    raw: Dict[str, Any] = dict(defaults or {})
    if path:
        file = Path(path)
        if not file.is_file():
            raise ConfigurationError(f"config file not found: {file}", {"key": "<file>"})
        try:
            loaded = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config file is not valid JSON: {e}", {"key": "<file>"})
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must hold a JSON object", {"key": "<root>"})
        raw.update(loaded)

    for assignment in overrides:
        apply_override(raw, assignment)
    for key, value in (("seed", seed), ("workers", workers), ("out", out)):
        if value is not None:
            raw[key] = value

    try:
        config = RunConfig.model_validate(raw)
    except PydanticValidationError as e:
        first = e.errors()[0]
        key = _key_path(first)
        raise ConfigurationError(f"{key}: {first['msg']}", {"key": key, "errors": len(e.errors())})
    config.check_domain()
    return config
