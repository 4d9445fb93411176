"""Standard, robust and winsorized-robust scaling of PL features and targets."""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from sklearn.preprocessing import RobustScaler, StandardScaler

from ..core.exceptions import DegenerateColumnError, ShapeMismatchError, ValidationError
from ..core.types import ScalerKind

DEFAULT_WINSOR_PCT: Tuple[float, float] = (1.0, 99.0)


class ColumnStats(BaseModel):
    """stat1/stat2 are mean/std (standard) or median/IQR (robust)."""
    stat1: float
    stat2: float
    clip_lo: Optional[float] = None
    clip_hi: Optional[float] = None


class ScalerState(BaseModel):
    kind: ScalerKind
    columns: List[ColumnStats] = Field(default_factory=list)

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.stat1 for c in self.columns])

    @property
    def scales(self) -> np.ndarray:
        return np.array([c.stat2 for c in self.columns])

    @property
    def width(self) -> int:
        return len(self.columns)


def _as_matrix(data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ShapeMismatchError("scaler input must be a 2-D matrix", got=data.shape)
    return data


def winsor_bounds(data, lo_pct: float, hi_pct: float) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise ValidationError("winsor percentiles must satisfy 0 <= lo < hi <= 100",
                              {"lo_pct": lo_pct, "hi_pct": hi_pct})
    data = _as_matrix(data)
    return (np.percentile(data, lo_pct, axis=0, method="linear"),
            np.percentile(data, hi_pct, axis=0, method="linear"))


def winsorize(data, lo_pct: float = DEFAULT_WINSOR_PCT[0], hi_pct: float = DEFAULT_WINSOR_PCT[1]) -> np.ndarray:
    """Clip every column to its [lo_pct, hi_pct] percentile band."""
    lo, hi = winsor_bounds(data, lo_pct, hi_pct)
    return np.clip(_as_matrix(data), lo, hi)


def fit_scaler(kind: ScalerKind, data, winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> ScalerState:
    kind = ScalerKind(kind)
    data = _as_matrix(data)
    if data.shape[0] < 2:
        raise ValidationError("fitting a scaler needs at least 2 rows", {"rows": data.shape[0]})

    clip_lo = clip_hi = None
    if kind is ScalerKind.ROBUST_WINSOR:
        clip_lo, clip_hi = winsor_bounds(data, *winsor_pct)
        data = np.clip(data, clip_lo, clip_hi)

    if kind is ScalerKind.STANDARD:
        fitted = StandardScaler().fit(data)
        centers, spreads = fitted.mean_, np.sqrt(fitted.var_)
    else:
        fitted = RobustScaler(quantile_range=(25.0, 75.0)).fit(data)
        q25, q75 = np.percentile(data, [25.0, 75.0], axis=0, method="linear")
        centers, spreads = fitted.center_, q75 - q25

    for column, spread in enumerate(spreads):
        if not spread > 0:
            raise DegenerateColumnError(f"column {column} has zero spread under the {kind.value} scaler",
                                        column=column)

    columns = [
        ColumnStats(
            stat1=float(centers[j]),
            stat2=float(spreads[j]),
            clip_lo=None if clip_lo is None else float(clip_lo[j]),
            clip_hi=None if clip_hi is None else float(clip_hi[j]),
        )
        for j in range(data.shape[1])
    ]
    return ScalerState(kind=kind, columns=columns)


def _check_width(state: ScalerState, data: np.ndarray) -> None:
    if data.shape[1] != state.width:
        raise ShapeMismatchError(f"expected {state.width} columns, got {data.shape[1]}",
                                 expected=(state.width,), got=(data.shape[1],))


def transform(state: ScalerState, data) -> np.ndarray:
    data = _as_matrix(data)
    _check_width(state, data)
    if state.kind is ScalerKind.ROBUST_WINSOR:
        lo = np.array([c.clip_lo for c in state.columns])
        hi = np.array([c.clip_hi for c in state.columns])
        data = np.clip(data, lo, hi)
    return (data - state.centers) / state.scales


def inverse_transform(state: ScalerState, scaled) -> np.ndarray:
    scaled = _as_matrix(scaled)
    _check_width(state, scaled)
    return scaled * state.scales + state.centers


class ScalerPair(BaseModel):
    """Feature and target scalers fitted on the same training split."""
    features: ScalerState
    targets: ScalerState

    @classmethod
    def fit(cls, kind: ScalerKind, features, targets,
            winsor_pct: Tuple[float, float] = DEFAULT_WINSOR_PCT) -> "ScalerPair":
        return cls(features=fit_scaler(kind, features, winsor_pct),
                   targets=fit_scaler(kind, targets, winsor_pct))
