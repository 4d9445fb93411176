"""Architecture, hyperparameter and dropout studies for the PL regressor."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.utils import resample

from ..core.exceptions import DivergenceError, TrainingError, ValidationError
from ..core.types import NetworkConfig, ScalerKind, TrainConfig
from .dataset_factory import PLDataset
from .feature_scaling import DEFAULT_WINSOR_PCT, ScalerPair
from .mlp_regressor import TrainingHistory, fit_network, forward, scaled_split

# Model-complexity index -> hidden layer sizes
ARCHITECTURES: Dict[int, Tuple[int, ...]] = {
    1: (8,),
    2: (12,),
    3: (16,),
    4: (20,),
    5: (24,),
    6: (28,),
    7: (32,),
    8: (64, 32),
    9: (76, 48),
    10: (88, 60),
    11: (128, 64),
    12: (128, 64, 32),
    13: (256, 128, 64, 32),
    14: (512, 256, 128, 64, 32, 16),
    15: (1024, 512, 256, 128, 64, 32, 16),
    16: (2048, 1024, 512, 256, 128, 64, 32, 16),
    17: (4096, 2048, 1024, 512, 256, 128, 64, 32, 16, 4),
    18: (8192, 4096, 2048, 1024, 512, 256, 128, 64, 32, 16, 4),
}

# Exploratory settings used for the architecture sweep
SWEEP_TRAIN_CONFIG = TrainConfig(epochs=100, batch_size=256, learning_rate=1e-3, patience=30)
GRID_BATCH_SIZES: Tuple[int, ...] = (64, 128, 256, 512)
GRID_LEARNING_RATES: Tuple[float, ...] = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)

_log = logger.bind(component="model_selection")


def _run_jobs(fn: Callable, jobs: List, workers: int) -> List:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _prepare(train_ds: PLDataset, val_ds: PLDataset, scaler_kind: ScalerKind,
             winsor_pct: Tuple[float, float]):
    scalers = ScalerPair.fit(scaler_kind, train_ds.features, train_ds.targets, winsor_pct)
    return (*scaled_split(scalers, train_ds), *scaled_split(scalers, val_ds))


# ---------------------------------------------------------------------------
# Bias-variance


@dataclass
class BiasVarianceRow:
    arch_id: int
    hidden_sizes: Tuple[int, ...]
    bias2: float
    variance: float
    total: float
    n_bags: int
    failed_bags: List[int] = field(default_factory=list)
    point_bias2: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    point_variance: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    point_total: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def decompose(predictions: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point bias^2, variance and total error of a (bags, points, outputs) ensemble.

    Squared norms over the outputs; total = bias^2 + variance holds point by point.
    """
    ensemble_mean = predictions.mean(axis=0)
    bias2 = np.sum((ensemble_mean - targets) ** 2, axis=-1)
    variance = np.mean(np.sum((predictions - ensemble_mean) ** 2, axis=-1), axis=0)
    total = np.mean(np.sum((predictions - targets) ** 2, axis=-1), axis=0)
    return bias2, variance, total


def _bag_job(job) -> Tuple[Optional[np.ndarray], Optional[str]]:
    hidden, bag_seed, x_train, y_train, x_val, y_val, train_config = job
    xb, yb = resample(x_train, y_train, replace=True, n_samples=x_train.shape[0], random_state=bag_seed)
    net = NetworkConfig(hidden_sizes=hidden, seed=bag_seed, input_width=x_train.shape[1],
                        output_width=y_train.shape[1])
    try:
        params, _ = fit_network(xb, yb, x_val, y_val, net, replace(train_config, seed=bag_seed))
    except TrainingError as e:
        return None, str(e)
    return forward(params, x_val), None


def bag_seeds(seed: int, bags: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(bags)]


def bias_variance_sweep(arch_ids: Sequence[int], bags: int, train_ds: PLDataset, val_ds: PLDataset,
                        train_config: TrainConfig = SWEEP_TRAIN_CONFIG,
                        scaler_kind: ScalerKind = ScalerKind.STANDARD, seed: int = 0,
                        seeds: Optional[Sequence[int]] = None, workers: int = 1,
                        winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> List[BiasVarianceRow]:
    """Bagged validation error of each architecture split into bias^2 and variance.

    Every bag trains a fresh network on a bootstrap resample of the training
    split; ``seeds`` overrides the per-bag seeds drawn from ``seed``.
    """
    unknown = [a for a in arch_ids if a not in ARCHITECTURES]
    if unknown:
        raise ValidationError(f"unknown architecture ids {unknown}", {"known": sorted(ARCHITECTURES)})
    seeds = list(seeds) if seeds is not None else bag_seeds(seed, bags)
    if len(seeds) < 1:
        raise ValidationError("bias-variance sweep needs at least one bag")
    x_train, y_train, x_val, y_val = _prepare(train_ds, val_ds, scaler_kind, winsor_pct)

    jobs = [(ARCHITECTURES[a], s, x_train, y_train, x_val, y_val, train_config) for a in arch_ids for s in seeds]
    _log.info(f"Bias-variance sweep: {len(arch_ids)} architectures x {len(seeds)} bags")
    outcomes = _run_jobs(_bag_job, jobs, workers)

    rows = []
    for k, arch_id in enumerate(arch_ids):
        block = outcomes[k * len(seeds):(k + 1) * len(seeds)]
        failed = [b for b, (_, err) in enumerate(block) if err is not None]
        preds = [p for p, err in block if err is None]
        if preds:
            point_bias2, point_var, point_total = decompose(np.stack(preds), y_val)
            bias2, var, total = point_bias2.mean(), point_var.mean(), point_total.mean()
        else:
            point_bias2 = point_var = point_total = np.zeros(0)
            bias2 = var = total = float("nan")
        rows.append(BiasVarianceRow(arch_id, ARCHITECTURES[arch_id], float(bias2), float(var), float(total),
                                    len(preds), failed, point_bias2, point_var, point_total))
        _log.info(f"arch {arch_id} {ARCHITECTURES[arch_id]}: bias2 {bias2:.4g}, variance {var:.4g}, "
                  f"total {total:.4g} ({len(failed)} failed bags)")
    return rows


def bias_variance_frame(rows: Sequence[BiasVarianceRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"arch_id": r.arch_id, "bias2": r.bias2, "variance": r.variance, "total": r.total} for r in rows],
        columns=["arch_id", "bias2", "variance", "total"],
    )


# ---------------------------------------------------------------------------
# Batch size x learning rate grid


@dataclass
class GridResult:
    batch_sizes: Tuple[int, ...]
    learning_rates: Tuple[float, ...]
    best_val: np.ndarray
    best_train: np.ndarray
    histories: Dict[Tuple[int, float], TrainingHistory]

    @property
    def best_cell(self) -> Tuple[int, float]:
        i, j = np.unravel_index(np.argmin(self.best_val), self.best_val.shape)
        return self.batch_sizes[i], self.learning_rates[j]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"bs": bs, "lr": lr, "best_val_mse": self.best_val[i, j], "best_train_mse": self.best_train[i, j]}
            for i, bs in enumerate(self.batch_sizes)
            for j, lr in enumerate(self.learning_rates)
        ]
        return pd.DataFrame(rows, columns=["bs", "lr", "best_val_mse", "best_train_mse"])

    def history_frame(self) -> pd.DataFrame:
        frames = []
        for (bs, lr), history in self.histories.items():
            frame = history.to_frame()
            frame.insert(0, "lr", lr)
            frame.insert(0, "bs", bs)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def _cell_job(job) -> Tuple[float, float, TrainingHistory]:
    x_train, y_train, x_val, y_val, net_config, train_config = job
    try:
        _, history = fit_network(x_train, y_train, x_val, y_val, net_config, train_config)
    except DivergenceError as e:
        history = e.details.get("history", TrainingHistory())
        return float("inf"), float("inf"), history
    return history.best_val_mse, history.best_train_mse, history


def hyperparameter_grid(batch_sizes: Sequence[int], learning_rates: Sequence[float],
                        train_ds: PLDataset, val_ds: PLDataset, epochs: int = 200, patience: int = 30,
                        net_config: NetworkConfig = NetworkConfig(),
                        scaler_kind: ScalerKind = ScalerKind.STANDARD, seed: int = 0, workers: int = 1,
                        winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> GridResult:
    """Best train/validation MSE per (batch size, learning rate); divergent cells are +inf."""
    if not batch_sizes or not learning_rates:
        raise ValidationError("hyperparameter grid axes must be non-empty")
    x_train, y_train, x_val, y_val = _prepare(train_ds, val_ds, scaler_kind, winsor_pct)
    net_config = replace(net_config, input_width=x_train.shape[1])
    cells = [(int(bs), float(lr)) for bs in batch_sizes for lr in learning_rates]
    jobs = [
        (x_train, y_train, x_val, y_val, net_config,
         TrainConfig(epochs=epochs, batch_size=bs, learning_rate=lr, patience=min(patience, epochs), seed=seed))
        for bs, lr in cells
    ]
    _log.info(f"Hyperparameter grid: {len(batch_sizes)} batch sizes x {len(learning_rates)} learning rates")
    outcomes = _run_jobs(_cell_job, jobs, workers)

    shape = (len(batch_sizes), len(learning_rates))
    best_val = np.array([o[0] for o in outcomes]).reshape(shape)
    best_train = np.array([o[1] for o in outcomes]).reshape(shape)
    histories = {cell: o[2] for cell, o in zip(cells, outcomes)}
    result = GridResult(tuple(int(b) for b in batch_sizes), tuple(float(lr) for lr in learning_rates),
                        best_val, best_train, histories)
    _log.info(f"Best validation cell: Bs={result.best_cell[0]}, lr={result.best_cell[1]}")
    return result


# ---------------------------------------------------------------------------
# Dropout


@dataclass
class DropoutSweepResult:
    rates: Tuple[float, ...]
    histories: Dict[float, TrainingHistory]

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for rate, history in self.histories.items():
            frame = history.to_frame()
            frame.insert(0, "dropout_p", rate)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"dropout_p": r, "best_val_mse": h.best_val_mse, "best_train_mse": h.best_train_mse}
             for r, h in self.histories.items()],
            columns=["dropout_p", "best_val_mse", "best_train_mse"],
        )


def dropout_sweep(rates: Sequence[float], train_ds: PLDataset, val_ds: PLDataset,
                  net_config: NetworkConfig = NetworkConfig(),
                  train_config: TrainConfig = TrainConfig(patience=0),
                  scaler_kind: ScalerKind = ScalerKind.STANDARD, workers: int = 1,
                  winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> DropoutSweepResult:
    """Validation curves per dropout probability at fixed batch size and learning rate."""
    if not rates:
        raise ValidationError("dropout sweep needs at least one rate")
    x_train, y_train, x_val, y_val = _prepare(train_ds, val_ds, scaler_kind, winsor_pct)
    net_config = replace(net_config, input_width=x_train.shape[1])
    jobs = [(x_train, y_train, x_val, y_val, replace(net_config, dropout_p=float(p)), train_config)
            for p in rates]
    _log.info(f"Dropout sweep over {list(rates)}")
    outcomes = _run_jobs(_cell_job, jobs, workers)
    return DropoutSweepResult(tuple(float(p) for p in rates),
                              {float(p): o[2] for p, o in zip(rates, outcomes)})
