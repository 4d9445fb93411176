"""Parameter sampling, PL training-set generation and dataset splits."""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import GenerationError, ShapeMismatchError, ValidationError
from ..core.types import TARGET_COLUMNS, TARGET_NAMES, MolecularParams, ParamRanges, PLScaling
from .artifacts import read_csv, write_csv
from .pl_forward import ForwardModel, beta_grid

FIXED_E2 = 25940.0  # cm^-1, two-photon resonance with the 12987 cm^-1 carrier


def feature_columns(width: int) -> List[str]:
    return [f"pl_{i:03d}" for i in range(width)]


def sample_initial_conditions(n: int, ranges: ParamRanges, include_E2: bool = False,
                              seed: Optional[int] = None) -> np.ndarray:
    """n uniform draws inside ``ranges``; rows ordered as [E2,] Omega2P, gamma2, Gamma12."""
    if n < 1:
        raise ValidationError("n must be at least 1", {"n": n})
    lo, hi = ranges.bounds(include_E2)
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(n, lo.size))


@dataclass
class PLDataset:
    """PL features (rows x betas, cps) and their [Omega2P, gamma2, Gamma12] targets."""
    features: np.ndarray
    targets: np.ndarray
    seed: Optional[int] = None
    betas: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.features.shape[0] != self.targets.shape[0]:
            raise ShapeMismatchError("features and targets must have the same row count",
                                     expected=(self.features.shape[0],), got=(self.targets.shape[0],))
        if self.targets.shape[1] != len(TARGET_NAMES):
            raise ShapeMismatchError("targets must have 3 columns",
                                     expected=(len(TARGET_NAMES),), got=(self.targets.shape[1],))
        if self.betas is not None:
            self.betas = np.asarray(self.betas, dtype=float)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "PLDataset":
        return PLDataset(self.features[rows], self.targets[rows], self.seed, self.betas)

    def within(self, ranges: ParamRanges) -> bool:
        return all(ranges.contains(row, include_E2=False) for row in self.targets)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=feature_columns(self.n_features))
        for j, name in enumerate(TARGET_NAMES):
            frame[TARGET_COLUMNS[name]] = self.targets[:, j]
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, seed: Optional[int] = None,
                   betas: Optional[Sequence[float]] = None) -> "PLDataset":
        target_cols = [TARGET_COLUMNS[name] for name in TARGET_NAMES]
        missing = [c for c in target_cols if c not in frame.columns]
        if missing:
            raise ValidationError(f"dataset table lacks target columns {missing}")
        pl_cols = [c for c in frame.columns if c.startswith("pl_")]
        if not pl_cols:
            raise ValidationError("dataset table has no pl_ feature columns")
        return cls(frame[pl_cols].to_numpy(dtype=float), frame[target_cols].to_numpy(dtype=float),
                   seed, betas)

    def save(self, path, provenance: Optional[dict] = None) -> None:
        header = {"seed": self.seed}
        if self.betas is not None:
            header["betas"] = self.betas
        header.update(provenance or {})
        write_csv(self.to_frame(), path, header)

    @classmethod
    def load(cls, path) -> "PLDataset":
        frame, provenance = read_csv(path)
        return cls.from_frame(frame, provenance.get("seed"), provenance.get("betas"))


class DatasetFactory:
    """Runs the forward model over sampled targets with E2 pinned."""

    def __init__(self, model=None, base: Optional[MolecularParams] = None, rows_per_job: int = 8):
        self.model = model if model is not None else ForwardModel()
        self.base = base or MolecularParams(E2=FIXED_E2)
        self.rows_per_job = max(1, int(rows_per_job))
        self.logger = logger.bind(component="dataset_factory")

    def _rows(self, targets: np.ndarray) -> List[MolecularParams]:
        return [self.base.with_estimate(*row) for row in targets]

    def _batch(self, rows: List[MolecularParams], betas: np.ndarray) -> np.ndarray:
        batched = getattr(self.model, "traces", None)
        if batched is not None:
            return np.asarray(batched(rows, betas), dtype=float)
        return np.stack([np.asarray(self.model.trace(p, betas).values, dtype=float) for p in rows])

    def _locate_failure(self, rows: List[MolecularParams], betas: np.ndarray, offset: int,
                        error: Exception) -> GenerationError:
        for i, params in enumerate(rows):
            try:
                self._batch([params], betas)
            except Exception as e:
                return GenerationError(f"Simulation failed on row {offset + i}: {e}", row=offset + i,
                                       details={"params": params.__dict__})
        return GenerationError(f"Simulation failed in rows {offset}..{offset + len(rows) - 1}: {error}",
                               row=offset)

    def generate(self, n: int, ranges: ParamRanges, betas: Sequence[float], seed: Optional[int] = None,
                 scaling: Optional[PLScaling] = None) -> PLDataset:
        betas = np.asarray(betas, dtype=float)
        targets = sample_initial_conditions(n, ranges, include_E2=False, seed=seed)
        if scaling is not None and isinstance(self.model, ForwardModel) and self.model.scaling != scaling:
            self.model = replace(self.model, scaling=scaling)

        self.logger.info(f"Generating {n} PL rows over {betas.size} chirps (seed={seed})")
        features = np.empty((n, betas.size))
        for start in range(0, n, self.rows_per_job):
            rows = self._rows(targets[start:start + self.rows_per_job])
            try:
                block = self._batch(rows, betas)
            except Exception as e:
                raise self._locate_failure(rows, betas, start, e)
            if block.shape != (len(rows), betas.size):
                raise GenerationError(f"Forward model returned shape {block.shape} for rows from {start}",
                                      row=start)
            invalid = np.flatnonzero(~np.all(np.isfinite(block), axis=1))
            if invalid.size:
                raise GenerationError(f"Forward model returned a non-finite trace for row {start + invalid[0]}",
                                      row=int(start + invalid[0]))
            features[start:start + len(rows)] = block
            self.logger.info(f"Generated {start + len(rows)}/{n} rows")

        return PLDataset(features, targets, seed, betas)


def generate_training_set(n: int, ranges: ParamRanges, betas: Optional[Sequence[float]] = None,
                          scaling: Optional[PLScaling] = None, seed: Optional[int] = None,
                          model=None, rows_per_job: int = 8) -> PLDataset:
    """Dataset of n PL traces with E2 fixed at 25940 cm^-1."""
    betas = beta_grid() if betas is None else betas
    return DatasetFactory(model, rows_per_job=rows_per_job).generate(n, ranges, betas, seed, scaling)


def split_sizes(n: int) -> Tuple[int, int, int]:
    """3/5, 1/5, 1/5 with the remainder going to training."""
    n_val = n // 5
    return n - 2 * n_val, n_val, n_val


def split_dataset(ds: PLDataset, seed: Optional[int] = None) -> Tuple[PLDataset, PLDataset, PLDataset]:
    if len(ds) < 5:
        raise ValidationError("splitting needs at least 5 rows", {"rows": len(ds)})
    n_train, n_val, _ = split_sizes(len(ds))
    order = np.random.default_rng(seed).permutation(len(ds))
    return (
        ds.subset(order[:n_train]),
        ds.subset(order[n_train:n_train + n_val]),
        ds.subset(order[n_train + n_val:]),
    )
