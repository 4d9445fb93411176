import numpy as np
import pytest

from src.core.exceptions import DegenerateColumnError, ShapeMismatchError, ValidationError
from src.core.types import ScalerKind
from src.services.feature_scaling import (
    ScalerPair,
    ScalerState,
    fit_scaler,
    inverse_transform,
    transform,
    winsor_bounds,
    winsorize,
)


@pytest.fixture
def data():
    rng = np.random.default_rng(3)
    return np.column_stack([rng.normal(10.0, 2.0, 500), rng.exponential(5.0, 500)])


def test_standard_scaler_zero_mean_unit_std(data):
    state = fit_scaler(ScalerKind.STANDARD, data)
    scaled = transform(state, data)
    np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(scaled.std(axis=0), 1.0, rtol=1e-12)


def test_robust_scaler_zero_median_unit_iqr(data):
    state = fit_scaler(ScalerKind.ROBUST, data)
    scaled = transform(state, data)
    np.testing.assert_allclose(np.median(scaled, axis=0), 0.0, atol=1e-12)
    q25, q75 = np.percentile(scaled, [25, 75], axis=0)
    np.testing.assert_allclose(q75 - q25, 1.0, rtol=1e-12)


@pytest.mark.parametrize("kind", list(ScalerKind))
def test_inverse_recovers_unclipped_data(kind, data):
    state = fit_scaler(kind, data)
    inside = data[(data >= [c.clip_lo or -np.inf for c in state.columns]).all(axis=1)
                  & (data <= [c.clip_hi or np.inf for c in state.columns]).all(axis=1)]
    np.testing.assert_allclose(inverse_transform(state, transform(state, inside)), inside, rtol=1e-12)


def test_winsorized_scaler_clips_outliers(data):
    spiked = data.copy()
    spiked[0, 1] = 1e6
    state = fit_scaler(ScalerKind.ROBUST_WINSOR, spiked, (1.0, 99.0))
    hi = state.columns[1].clip_hi
    assert hi < 1e6
    assert transform(state, spiked)[0, 1] == pytest.approx((hi - state.columns[1].stat1) / state.columns[1].stat2)


def test_winsorize_bounds_columns():
    x = np.arange(101, dtype=float)[:, None]
    lo, hi = winsor_bounds(x, 5.0, 95.0)
    assert lo[0] == pytest.approx(5.0) and hi[0] == pytest.approx(95.0)
    clipped = winsorize(x, 5.0, 95.0)
    assert clipped.min() == pytest.approx(5.0) and clipped.max() == pytest.approx(95.0)


def test_winsor_percentiles_validated():
    with pytest.raises(ValidationError):
        winsor_bounds(np.ones((3, 1)), 90.0, 10.0)


def test_constant_column_is_degenerate():
    x = np.column_stack([np.arange(10.0), np.full(10, 4.0)])
    with pytest.raises(DegenerateColumnError) as info:
        fit_scaler(ScalerKind.STANDARD, x)
    assert info.value.column == 1


def test_needs_two_rows():
    with pytest.raises(ValidationError):
        fit_scaler(ScalerKind.STANDARD, np.ones((1, 3)))


def test_width_mismatch(data):
    state = fit_scaler(ScalerKind.STANDARD, data)
    with pytest.raises(ShapeMismatchError):
        transform(state, np.ones((4, 3)))


def test_scaler_state_serializes(data):
    pair = ScalerPair.fit(ScalerKind.ROBUST_WINSOR, data, data[:, :1])
    restored = ScalerPair.model_validate(pair.model_dump(mode="json"))
    assert restored.features.kind is ScalerKind.ROBUST_WINSOR
    np.testing.assert_allclose(transform(restored.features, data), transform(pair.features, data))
    assert isinstance(restored.targets, ScalerState) and restored.targets.width == 1
