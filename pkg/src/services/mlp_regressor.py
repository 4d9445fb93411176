"""Feed-forward ReLU regressor from PL traces to [Omega2P, gamma2, Gamma12].

Weights are stored as (fan_in, fan_out) matrices so a batch propagates as
``x @ W + b``. Training minimizes the batch-mean squared error norm with Adam;
the per-epoch losses reported in the history are dataset means of the squared
error norm.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

from ..core.exceptions import ArtifactError, DivergenceError, MetricUndefinedError, ShapeMismatchError, ValidationError
from ..core.types import TARGET_COLUMNS, TARGET_NAMES, NetworkConfig, ScalerKind, TrainConfig
from .artifacts import read_json, write_json
from .dataset_factory import PLDataset
from .feature_scaling import DEFAULT_WINSOR_PCT, ScalerPair, inverse_transform, transform

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_log = logger.bind(component="mlp_regressor")


@dataclass
class NetworkParams:
    """theta = {W_i, b_i}, input layer first."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeMismatchError("weights and biases must pair up layer by layer",
                                     expected=(len(self.weights),), got=(len(self.biases),))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatchError(f"layer {i} bias does not match its weight matrix",
                                         expected=(w.shape[1],), got=b.shape)
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ShapeMismatchError(f"layer {i} input width does not chain",
                                         expected=(self.weights[i - 1].shape[1],), got=(w.shape[0],))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        half = len(arrays) // 2
        return cls(list(arrays[:half]), list(arrays[half:]))

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])


def init_network(config: NetworkConfig) -> NetworkParams:
    """He-uniform weights with bound sqrt(6 / fan_in), zero biases."""
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights = [
        rng.uniform(-np.sqrt(6.0 / fan_in), np.sqrt(6.0 / fan_in), size=(fan_in, fan_out))
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    ]
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    return NetworkParams(weights, biases)


def dropout_masks(params: NetworkParams, batch_size: int, dropout_p: float,
                  rng: np.random.Generator) -> Optional[List[np.ndarray]]:
    """Inverted-dropout masks (0 or 1/(1-p)) for every hidden layer; None when p = 0."""
    if dropout_p <= 0.0:
        return None
    keep = 1.0 - dropout_p
    return [
        (rng.random((batch_size, w.shape[1])) < keep) / keep
        for w in params.weights[:-1]
    ]


def _as_batch(params: NetworkParams, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatchError(f"expected {params.weights[0].shape[0]} input features, got {x.shape[1]}",
                                 expected=(params.weights[0].shape[0],), got=(x.shape[1],))
    return x, single


def _propagate(params: NetworkParams, x: np.ndarray, masks: Optional[List[np.ndarray]]):
    activations = [x]
    pre_activations = []
    a = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre_activations.append(z)
        if i == params.n_layers - 1:
            a = z
        else:
            a = np.maximum(z, 0.0)
            if masks is not None:
                a = a * masks[i]
        activations.append(a)
    return activations, pre_activations


def forward(params: NetworkParams, x, dropout_p: float = 0.0, training: bool = False,
            rng: Optional[np.random.Generator] = None,
            masks: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """Network output for a single 55-vector or a batch of them.

    Dropout only applies when ``training`` is set; pass explicit ``masks`` or
    an ``rng`` to draw them.
    """
    x, single = _as_batch(params, x)
    if not training:
        masks = None
    elif masks is None and dropout_p > 0.0:
        masks = dropout_masks(params, x.shape[0], dropout_p, rng or np.random.default_rng())
    out = _propagate(params, x, masks)[0][-1]
    return out[0] if single else out


def _squared_norms(params: NetworkParams, x, y, masks=None) -> np.ndarray:
    x, _ = _as_batch(params, x)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape != (x.shape[0], params.weights[-1].shape[1]):
        raise ShapeMismatchError("targets do not match the batch",
                                 expected=(x.shape[0], params.weights[-1].shape[1]), got=y.shape)
    out = _propagate(params, x, masks)[0][-1]
    return np.sum((out - y) ** 2, axis=1)


def batch_loss(params: NetworkParams, x, y, masks: Optional[List[np.ndarray]] = None) -> float:
    """Sum over the batch of ||Q - Q_pred||^2 divided by the batch size."""
    if np.asarray(x).size == 0:
        raise ValidationError("batch is empty")
    return float(np.mean(_squared_norms(params, x, y, masks)))


def gradient(params: NetworkParams, x, y, masks: Optional[List[np.ndarray]] = None) -> NetworkParams:
    """Reverse-mode gradient of batch_loss. ReLU'(0) = 0."""
    x, _ = _as_batch(params, x)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    activations, pre_activations = _propagate(params, x, masks)
    delta = 2.0 * (activations[-1] - y) / x.shape[0]

    grad_w: List[np.ndarray] = [None] * params.n_layers
    grad_b: List[np.ndarray] = [None] * params.n_layers
    for i in reversed(range(params.n_layers)):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ params.weights[i].T) * (pre_activations[i - 1] > 0.0)
            if masks is not None:
                delta = delta * masks[i - 1]
    return NetworkParams(grad_w, grad_b)


@dataclass
class AdamState:
    m: NetworkParams
    v: NetworkParams
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like())


def adam_step(state: AdamState, params: NetworkParams, grads: NetworkParams,
              learning_rate: float) -> Tuple[NetworkParams, AdamState]:
    """Bias-corrected Adam update. Returns new objects; inputs are left untouched."""
    t = state.step + 1
    new_m, new_v, new_theta = [], [], []
    for theta, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_theta.append(theta - learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(NetworkParams.from_arrays(new_m), NetworkParams.from_arrays(new_v), t,
                          state.beta1, state.beta2, state.eps)
    return NetworkParams.from_arrays(new_theta), new_state


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainingHistory:
    train_mse: List[float] = field(default_factory=list)
    val_mse: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def best_val_mse(self) -> float:
        return self.val_mse[self.best_epoch] if self.best_epoch >= 0 else float("inf")

    @property
    def best_train_mse(self) -> float:
        return min(self.train_mse) if self.train_mse else float("inf")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "epoch": np.arange(1, len(self.train_mse) + 1),
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
        })


def _rngs(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    shuffle_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(shuffle_seq), np.random.default_rng(dropout_seq)


def fit_network(x_train: np.ndarray, y_train: np.ndarray, x_val: np.ndarray, y_val: np.ndarray,
                net_config: NetworkConfig, train_config: TrainConfig) -> Tuple[NetworkParams, TrainingHistory]:
    """Mini-batch Adam on already-scaled arrays; returns the best-validation snapshot."""
    n = x_train.shape[0]
    if n == 0 or x_val.shape[0] == 0:
        raise ValidationError("training and validation splits must be non-empty")
    params = init_network(net_config)
    state = AdamState.for_params(params)
    shuffle_rng, dropout_rng = _rngs(train_config.seed)
    history = TrainingHistory()
    best = params.copy()
    since_best = 0

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(train_config.epochs):
            order = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, train_config.batch_size):
                rows = order[start:start + train_config.batch_size]
                xb, yb = x_train[rows], y_train[rows]
                masks = dropout_masks(params, rows.size, net_config.dropout_p, dropout_rng)
                total += float(np.sum(_squared_norms(params, xb, yb, masks)))
                params, state = adam_step(state, params, gradient(params, xb, yb, masks),
                                          train_config.learning_rate)

            train_mse = total / n
            val_mse = float(np.mean(_squared_norms(params, x_val, y_val)))
            history.train_mse.append(train_mse)
            history.val_mse.append(val_mse)
            if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
                raise DivergenceError(f"Training diverged at epoch {epoch + 1}", epoch=epoch + 1,
                                      details={"history": history})

            if history.best_epoch < 0 or val_mse < history.best_val_mse:
                history.best_epoch = epoch
                best = params.copy()
                since_best = 0
                _log.info(f"epoch {epoch + 1}: train {train_mse:.6g}, val {val_mse:.6g} (best)")
            else:
                since_best += 1
                _log.debug(f"epoch {epoch + 1}: train {train_mse:.6g}, val {val_mse:.6g}")

            if train_config.patience and since_best >= train_config.patience:
                history.stopped_early = True
                _log.info(f"Early stop at epoch {epoch + 1}; best epoch {history.best_epoch + 1}")
                break

    return best, history


@dataclass
class TrainedModel:
    params: NetworkParams
    scalers: ScalerPair
    net_config: NetworkConfig
    train_config: TrainConfig
    history: TrainingHistory = field(default_factory=TrainingHistory)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hidden_sizes": list(self.net_config.hidden_sizes),
            "network_config": asdict(self.net_config),
            "weights": [w.tolist() for w in self.params.weights],
            "biases": [b.tolist() for b in self.params.biases],
            "scaler_states": self.scalers.model_dump(mode="json"),
            "train_config": asdict(self.train_config),
            "history": {
                "train_mse": self.history.train_mse,
                "val_mse": self.history.val_mse,
                "best_epoch": self.history.best_epoch,
                "stopped_early": self.history.stopped_early,
            },
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "TrainedModel":
        try:
            net = dict(payload.get("network_config") or {"hidden_sizes": payload["hidden_sizes"]})
            net["hidden_sizes"] = tuple(net["hidden_sizes"])
            params = NetworkParams([np.asarray(w, dtype=float) for w in payload["weights"]],
                                   [np.asarray(b, dtype=float) for b in payload["biases"]])
            history = TrainingHistory(**payload.get("history", {}))
            return cls(
                params=params,
                scalers=ScalerPair.model_validate(payload["scaler_states"]),
                net_config=NetworkConfig(**net),
                train_config=TrainConfig(**payload.get("train_config", {})),
                history=history,
            )
        except (KeyError, TypeError) as e:
            raise ArtifactError(f"Model file is missing or has malformed fields: {e}")

    def save(self, path, config: Optional[Dict[str, Any]] = None) -> None:
        payload = self.to_dict()
        payload["config"] = config or {}
        write_json(payload, path)

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(read_json(path))


def scaled_split(scalers: ScalerPair, ds: PLDataset) -> Tuple[np.ndarray, np.ndarray]:
    return transform(scalers.features, ds.features), transform(scalers.targets, ds.targets)


def train(train_ds: PLDataset, val_ds: PLDataset, net_config: NetworkConfig = NetworkConfig(),
          train_config: TrainConfig = TrainConfig(), scaler_kind: ScalerKind = ScalerKind.STANDARD,
          winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> TrainedModel:
    """Fit scalers on ``train_ds`` only, then train with early stopping."""
    if net_config.input_width != train_ds.n_features:
        raise ShapeMismatchError("network input width does not match the dataset",
                                 expected=(net_config.input_width,), got=(train_ds.n_features,))
    scalers = ScalerPair.fit(scaler_kind, train_ds.features, train_ds.targets, winsor_pct)
    x_train, y_train = scaled_split(scalers, train_ds)
    x_val, y_val = scaled_split(scalers, val_ds)
    _log.info(f"Training {net_config.layer_sizes} on {len(train_ds)} rows "
              f"(Bs={train_config.batch_size}, lr={train_config.learning_rate}, p={net_config.dropout_p})")
    params, history = fit_network(x_train, y_train, x_val, y_val, net_config, train_config)
    return TrainedModel(params, scalers, net_config, train_config, history)


# ---------------------------------------------------------------------------
# Evaluation and prediction


@dataclass
class TargetMetrics:
    rmse: float
    mae: float
    r2: float


@dataclass
class EvaluationReport:
    scaled: Dict[str, TargetMetrics]
    physical: Dict[str, TargetMetrics]

    def to_frame(self, method: str) -> pd.DataFrame:
        rows = []
        for space, metrics in (("scaled", self.scaled), ("physical", self.physical)):
            for target, m in metrics.items():
                rows.append({"method": method, "target": target, "rmse": m.rmse, "mae": m.mae,
                             "r2": m.r2, "space": space})
        return pd.DataFrame(rows, columns=["method", "target", "rmse", "mae", "r2", "space"])


def regression_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Dict[str, TargetMetrics]:
    y_true, y_pred = np.atleast_2d(y_true), np.atleast_2d(y_pred)
    for j, name in enumerate(TARGET_NAMES):
        if np.ptp(y_true[:, j]) == 0.0:
            raise MetricUndefinedError(f"R^2 is undefined for the constant target column {name}",
                                       {"target": name})
    rmse = np.sqrt(mean_squared_error(y_true, y_pred, multioutput="raw_values"))
    mae = mean_absolute_error(y_true, y_pred, multioutput="raw_values")
    r2 = r2_score(y_true, y_pred, multioutput="raw_values")
    return {
        name: TargetMetrics(float(rmse[j]), float(mae[j]), float(r2[j]))
        for j, name in enumerate(TARGET_NAMES)
    }


def predict_scaled(model: TrainedModel, features) -> np.ndarray:
    return forward(model.params, transform(model.scalers.features, features))


def evaluate(model: TrainedModel, test_ds: PLDataset) -> EvaluationReport:
    """RMSE, MAE and R^2 per target in scaled and in physical units."""
    scaled_pred = predict_scaled(model, test_ds.features)
    scaled_true = transform(model.scalers.targets, test_ds.targets)
    physical_pred = inverse_transform(model.scalers.targets, scaled_pred)
    return EvaluationReport(
        scaled=regression_metrics(scaled_true, scaled_pred),
        physical=regression_metrics(test_ds.targets, physical_pred),
    )


def predict_params(model: TrainedModel, pl_trace) -> np.ndarray:
    """[Omega2P cm^-1, gamma2 fs^-1, Gamma12 fs^-1] from one PL trace in cps."""
    values = np.asarray(pl_trace, dtype=float).ravel()
    if values.size != model.net_config.input_width:
        raise ShapeMismatchError(
            f"trace has {values.size} values, the model expects {model.net_config.input_width}",
            expected=(model.net_config.input_width,), got=(values.size,),
        )
    scaled = predict_scaled(model, values[None, :])
    return inverse_transform(model.scalers.targets, scaled)[0]


def predictions_frame(model: TrainedModel, ds: PLDataset) -> pd.DataFrame:
    """True and predicted targets in physical units, one row per sample."""
    predicted = inverse_transform(model.scalers.targets, predict_scaled(model, ds.features))
    frame = pd.DataFrame()
    for j, name in enumerate(TARGET_NAMES):
        frame[f"true_{TARGET_COLUMNS[name]}"] = ds.targets[:, j]
        frame[f"pred_{TARGET_COLUMNS[name]}"] = predicted[:, j]
    return frame
