"""Penalized PL least squares minimized by a multi-start Nelder-Mead simplex.

Parameters are optimized in coordinates mapped affinely onto [0, 1] per
ParamRanges. Coordinates whose range has lo == hi are pinned and left out of
the simplex, so a 4-parameter fit with E2 pinned runs the same simplex as a
3-parameter fit with E2 fixed.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import FitError, ShapeMismatchError, ValidationError
from ..core.types import FREE_E2_NAMES, TARGET_NAMES, FitSettings, MolecularParams, ParamRanges, PLScaling
from .artifacts import write_csv, write_json
from .pl_forward import ForwardModel, PLTrace

TWO_PHOTON_REFERENCE = 25940.0  # cm^-1

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5

_log = logger.bind(component="simplex_fitter")


@dataclass
class FitResult:
    """Outcome of one simplex run. ``q_star`` is in physical units."""
    q_star: np.ndarray
    loss_star: float
    iterations: int
    converged: bool
    start_index: int = 0
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    q_history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self, names: Sequence[str]) -> Dict[str, Any]:
        return {
            "start_index": self.start_index,
            "q_star": {n: float(v) for n, v in zip(names, self.q_star)},
            "loss_star": float(self.loss_star),
            "iterations": self.iterations,
            "converged": self.converged,
            "error": self.error,
        }


# ---------------------------------------------------------------------------
# Simplex


class NelderMead:
    """Nelder-Mead simplex over numpy vertices.

    Non-finite objective values are stored as +inf so such vertices are always
    the first to be replaced.
    """

    def __init__(self, f: Callable[[np.ndarray], float], x0, step, settings: FitSettings):
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim != 1 or x0.size == 0 or not np.all(np.isfinite(x0)):
            raise ValidationError("x0 must be a finite non-empty vector", {"x0": x0.tolist()})
        self.f = f
        self.settings = settings
        self.n = x0.size
        step = np.broadcast_to(np.asarray(step, dtype=float), x0.shape)
        self.vertices = np.tile(x0, (self.n + 1, 1))
        self.vertices[1:] += np.diag(step)
        self.values = np.array([self._eval(v) for v in self.vertices])
        self.nfe = self.n + 1

    def _eval(self, x: np.ndarray) -> float:
        value = float(self.f(x))
        return value if np.isfinite(value) else np.inf

    def _order(self) -> None:
        order = np.argsort(self.values, kind="stable")
        self.vertices = self.vertices[order]
        self.values = self.values[order]

    def spread(self) -> float:
        if not np.all(np.isfinite(self.values)):
            return np.inf
        return float(self.values.max() - self.values.min())

    @property
    def best(self) -> Tuple[np.ndarray, float]:
        i = int(np.argmin(self.values))
        return self.vertices[i].copy(), float(self.values[i])

    def step(self) -> str:
        """One reflection step with expansion, contraction or shrink; returns the move taken."""
        self._order()
        worst, f_worst = self.vertices[-1], self.values[-1]
        f_best, f_second_worst = self.values[0], self.values[-2]
        centroid = self.vertices[:-1].mean(axis=0)

        reflected = centroid + REFLECT * (centroid - worst)
        f_reflected = self._eval(reflected)
        self.nfe += 1

        if f_best <= f_reflected < f_second_worst:
            self._replace_worst(reflected, f_reflected)
            return "reflect"

        if f_reflected < f_best:
            expanded = centroid + EXPAND * (reflected - centroid)
            f_expanded = self._eval(expanded)
            self.nfe += 1
            if f_expanded < f_reflected:
                self._replace_worst(expanded, f_expanded)
                return "expand"
            self._replace_worst(reflected, f_reflected)
            return "reflect"

        if f_reflected < f_worst:
            outside = centroid + CONTRACT * (reflected - centroid)
            f_outside = self._eval(outside)
            self.nfe += 1
            if f_outside <= f_reflected:
                self._replace_worst(outside, f_outside)
                return "contract_outside"
        else:
            inside = centroid + CONTRACT * (worst - centroid)
            f_inside = self._eval(inside)
            self.nfe += 1
            if f_inside < f_worst:
                self._replace_worst(inside, f_inside)
                return "contract_inside"

        self._shrink()
        return "shrink"

    def _replace_worst(self, x: np.ndarray, value: float) -> None:
        self.vertices[-1] = x
        self.values[-1] = value

    def _shrink(self) -> None:
        anchor = self.vertices[0]
        for i in range(1, self.n + 1):
            self.vertices[i] = anchor + SHRINK * (self.vertices[i] - anchor)
            self.values[i] = self._eval(self.vertices[i])
        self.nfe += self.n

    def run(self, start_index: int = 0) -> FitResult:
        best_x, best_f = self.best
        loss_history = [best_f]
        x_history = [best_x]
        iterations = 0
        converged = False
        while iterations < self.settings.maxiter:
            if self.spread() < self.settings.ftol:
                converged = True
                break
            move = self.step()
            iterations += 1
            best_x, best_f = self.best
            loss_history.append(best_f)
            x_history.append(best_x)
            _log.debug(f"start {start_index} iter {iterations}: {move}, best loss {best_f:.6g}")
        return FitResult(
            q_star=best_x,
            loss_star=best_f,
            iterations=iterations,
            converged=converged,
            start_index=start_index,
            loss_history=np.asarray(loss_history),
            q_history=np.asarray(x_history),
        )


def nelder_mead(f: Callable[[np.ndarray], float], x0, settings: FitSettings = FitSettings(),
                step=None) -> FitResult:
    """Minimize ``f`` from ``x0``; the initial simplex offsets each coordinate by ``step``."""
    step = settings.initial_step if step is None else step
    return NelderMead(f, x0, step, settings).run()


# ---------------------------------------------------------------------------
# Loss


def params_from_vector(q, base: MolecularParams) -> MolecularParams:
    """[E2,] Omega2P, gamma2, Gamma12 -> MolecularParams on top of ``base``."""
    q = np.asarray(q, dtype=float)
    if q.size == 4:
        return base.with_estimate(q[1], q[2], q[3], E2=q[0])
    if q.size == 3:
        return base.with_estimate(q[0], q[1], q[2])
    raise ShapeMismatchError("parameter vector must have 3 or 4 entries", expected=(3,), got=q.shape)


def _model_for(model, scaling: PLScaling):
    if model is None:
        return ForwardModel(scaling=scaling)
    if isinstance(model, ForwardModel) and model.scaling != scaling:
        return replace(model, scaling=scaling)
    return model


def mse_loss(q, observed: PLTrace, scaling: PLScaling, model=None,
             base: Optional[MolecularParams] = None) -> float:
    """Mean squared residual (cps^2) between ``observed`` and the model trace at ``q``."""
    if len(observed) == 0:
        raise ValidationError("observed trace is empty")
    base = base or MolecularParams(E2=TWO_PHOTON_REFERENCE)
    predicted = _model_for(model, scaling).trace(params_from_vector(q, base), observed.betas)
    residual = observed.values - np.asarray(predicted.values, dtype=float)
    return float(np.mean(residual ** 2))


def penalty(q, lam: float, base: Optional[MolecularParams] = None,
            two_photon_reference: float = TWO_PHOTON_REFERENCE) -> float:
    """lam (E2 - 2 w0)^2, with E2 taken from ``base`` for 3-entry vectors."""
    q = np.asarray(q, dtype=float)
    e2 = q[0] if q.size == 4 else (base or MolecularParams(E2=TWO_PHOTON_REFERENCE)).E2
    return float(lam * (e2 - two_photon_reference) ** 2)


def total_loss(q, observed: PLTrace, scaling: PLScaling, lam: float,
               two_photon_reference: float = TWO_PHOTON_REFERENCE, model=None,
               base: Optional[MolecularParams] = None) -> float:
    base = base or MolecularParams(E2=TWO_PHOTON_REFERENCE)
    return mse_loss(q, observed, scaling, model, base) + penalty(q, lam, base, two_photon_reference)


@dataclass
class FitObjective:
    """Penalized loss as a function of the free scaled coordinates.

    Out-of-box proposals are clamped before the forward model runs and pay a
    quadratic barrier on the excess.
    """
    observed: PLTrace
    scaling: PLScaling
    ranges: ParamRanges
    include_E2: bool
    lam: float = 1e-2
    barrier_weight: float = 1e6
    two_photon_reference: float = TWO_PHOTON_REFERENCE
    model: Any = None
    base: MolecularParams = field(default_factory=lambda: MolecularParams(E2=TWO_PHOTON_REFERENCE))

    def __post_init__(self):
        self.model = _model_for(self.model, self.scaling)
        self.lo, self.hi = self.ranges.bounds(self.include_E2)
        self.free = self.hi > self.lo

    @property
    def names(self) -> Tuple[str, ...]:
        return FREE_E2_NAMES if self.include_E2 else TARGET_NAMES

    def to_scaled(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.size != self.lo.size:
            raise ShapeMismatchError("start vector has the wrong number of parameters",
                                     expected=(self.lo.size,), got=q.shape)
        width = np.where(self.free, self.hi - self.lo, 1.0)
        return ((q - self.lo) / width)[self.free]

    def to_physical(self, z) -> np.ndarray:
        full = np.zeros(self.lo.size)
        full[self.free] = np.asarray(z, dtype=float)
        return self.lo + np.clip(full, 0.0, 1.0) * (self.hi - self.lo)

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=float)
        excess = z - np.clip(z, 0.0, 1.0)
        q = self.to_physical(z)
        loss = total_loss(q, self.observed, self.scaling, self.lam, self.two_photon_reference,
                          self.model, self.base)
        return loss + self.barrier_weight * float(np.sum(excess ** 2))


def _fit_one(job: Tuple[int, np.ndarray, FitObjective, FitSettings]) -> FitResult:
    index, start, objective, settings = job
    try:
        z0 = objective.to_scaled(start)
        result = NelderMead(objective, z0, settings.initial_step, settings).run(start_index=index)
    except Exception as e:
        _log.warning(f"Start {index} failed: {e}")
        return FitResult(q_star=np.full(len(objective.names), np.nan), loss_star=np.inf, iterations=0,
                         converged=False, start_index=index, error=str(e))
    result.q_star = objective.to_physical(result.q_star)
    result.q_history = np.array([objective.to_physical(z) for z in result.q_history])
    return result


def multi_start_fit(observed: PLTrace, starts, settings: FitSettings = FitSettings(),
                    scaling: PLScaling = PLScaling(), ranges: ParamRanges = ParamRanges(),
                    model=None, workers: int = 1,
                    two_photon_reference: float = TWO_PHOTON_REFERENCE,
                    base: Optional[MolecularParams] = None) -> List[FitResult]:
    """One FitResult per start, in start order. Rows of ``starts`` have 3 or 4 entries."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[0] == 0 or starts.shape[1] not in (3, 4):
        raise FitError("starts must be a non-empty list of 3- or 4-entry vectors",
                       {"shape": starts.shape})
    if workers > 1 and isinstance(model, ForwardModel):
        model = replace(model, workers=1)
    objective = FitObjective(
        observed=observed,
        scaling=scaling,
        ranges=ranges,
        include_E2=starts.shape[1] == 4,
        lam=settings.lam,
        barrier_weight=settings.barrier_weight,
        two_photon_reference=two_photon_reference,
        model=model,
        base=base or MolecularParams(E2=TWO_PHOTON_REFERENCE),
    )
    jobs = [(i, start, objective, settings) for i, start in enumerate(starts)]
    _log.info(f"Fitting {len(jobs)} starts (lambda={settings.lam}, maxiter={settings.maxiter}, "
              f"workers={workers})")
    if workers <= 1:
        results = [_fit_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one, jobs))
    n_conv = sum(r.converged for r in results)
    _log.info(f"Fit finished: {n_conv}/{len(results)} converged, "
              f"{sum(r.failed for r in results)} failed")
    return results


# ---------------------------------------------------------------------------
# Ensemble statistics


@dataclass
class EnsembleSummary:
    names: Tuple[str, ...]
    n_total: int
    n_retained: int
    mean: Dict[str, float]
    std: Dict[str, float]
    histograms: Dict[str, Tuple[np.ndarray, np.ndarray]]
    mean_error: np.ndarray
    empty: bool = False
    iteration: Optional[int] = None

    def histogram_frame(self) -> pd.DataFrame:
        rows = []
        for name, (edges, counts) in self.histograms.items():
            for lo, hi, count in zip(edges[:-1], edges[1:], counts):
                rows.append({"param": name, "bin_lo": lo, "bin_hi": hi, "count": int(count)})
        return pd.DataFrame(rows, columns=["param", "bin_lo", "bin_hi", "count"])

    def curve_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"iteration": np.arange(self.mean_error.size), "mean_error": self.mean_error})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_total": self.n_total,
            "n_retained": self.n_retained,
            "empty": self.empty,
            "iteration": self.iteration,
            "mean": self.mean,
            "std": self.std,
            "histograms": {
                name: {"edges": edges.tolist(), "counts": counts.tolist()}
                for name, (edges, counts) in self.histograms.items()
            },
        }


def _padded(histories: List[np.ndarray]) -> np.ndarray:
    length = max(h.shape[0] for h in histories)
    return np.stack([
        np.concatenate([h, np.repeat(h[-1:], length - h.shape[0], axis=0)]) for h in histories
    ])


def _histogram(values: np.ndarray, bins: int) -> Tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(values, bins=bins)
    return edges, counts


def ensemble_stats(results: Sequence[FitResult], bins: int = 30, converged_only: bool = True,
                   iteration: Optional[int] = None) -> EnsembleSummary:
    """Mean, std and histogram per parameter over the retained results.

    ``iteration`` takes each run's best vertex at that iteration (or its last
    one if it stopped earlier) instead of its final answer.
    """
    if not results:
        raise ValidationError("ensemble_stats needs at least one result")
    names = FREE_E2_NAMES if results[0].q_star.size == 4 else TARGET_NAMES
    retained = [r for r in results if not r.failed and (r.converged or not converged_only)]
    if not retained:
        return EnsembleSummary(names, len(results), 0, {}, {}, {}, np.zeros(0), empty=True,
                               iteration=iteration)

    if iteration is None:
        points = np.stack([r.q_star for r in retained])
    else:
        points = np.stack([r.q_history[min(iteration, r.q_history.shape[0] - 1)] for r in retained])

    mean_error = _padded([r.loss_history for r in retained]).mean(axis=0)
    return EnsembleSummary(
        names=names,
        n_total=len(results),
        n_retained=len(retained),
        mean={n: float(v) for n, v in zip(names, points.mean(axis=0))},
        std={n: float(v) for n, v in zip(names, points.std(axis=0))},
        histograms={n: _histogram(points[:, j], bins) for j, n in enumerate(names)},
        mean_error=mean_error,
        iteration=iteration,
    )


# ---------------------------------------------------------------------------
# Regularization scan and reports


@dataclass
class LambdaScanRow:
    lam: float
    n_converged: int
    mean_abs_detuning: float
    mean_mse: float


def lambda_scan(observed: PLTrace, starts, lambdas: Sequence[float],
                settings: FitSettings = FitSettings(), scaling: PLScaling = PLScaling(),
                ranges: ParamRanges = ParamRanges(), model=None, workers: int = 1,
                two_photon_reference: float = TWO_PHOTON_REFERENCE) -> Tuple[List[LambdaScanRow], Dict[float, List[FitResult]]]:
    """Refit the same 4-parameter starts at each lambda."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != 4:
        raise FitError("lambda scan needs 4-entry starts with a free E2", {"shape": starts.shape})
    rows, by_lambda = [], {}
    for lam in lambdas:
        results = multi_start_fit(observed, starts, replace(settings, lam=float(lam)), scaling, ranges,
                                  model, workers, two_photon_reference)
        kept = [r for r in results if r.converged and not r.failed]
        detuning = [abs(r.q_star[0] - two_photon_reference) for r in kept]
        mse = [r.loss_star - penalty(r.q_star, lam, two_photon_reference=two_photon_reference) for r in kept]
        rows.append(LambdaScanRow(
            lam=float(lam),
            n_converged=len(kept),
            mean_abs_detuning=float(np.mean(detuning)) if kept else float("nan"),
            mean_mse=float(np.mean(mse)) if kept else float("nan"),
        ))
        by_lambda[float(lam)] = results
        _log.info(f"lambda={lam}: {len(kept)} converged, mean |E2 - 2w0| = {rows[-1].mean_abs_detuning:.4g}")
    return rows, by_lambda


def lambda_scan_frame(rows: Sequence[LambdaScanRow]) -> pd.DataFrame:
    return pd.DataFrame([r.__dict__ for r in rows], columns=["lam", "n_converged", "mean_abs_detuning", "mean_mse"])


@dataclass
class FitReport:
    settings: FitSettings
    results: List[FitResult]
    summary: EnsembleSummary
    unfiltered: EnsembleSummary

    @classmethod
    def build(cls, settings: FitSettings, results: List[FitResult], bins: int = 30) -> "FitReport":
        return cls(settings, results, ensemble_stats(results, bins, converged_only=True),
                   ensemble_stats(results, bins, converged_only=False))

    def to_dict(self) -> Dict[str, Any]:
        names = self.summary.names
        return {
            "settings": dict(self.settings.__dict__),
            "results": [r.to_dict(names) for r in self.results],
            "summary": self.summary.to_dict(),
            "unfiltered_summary": self.unfiltered.to_dict(),
        }

    def write(self, out_dir, config: Optional[Dict[str, Any]] = None,
              provenance: Optional[Dict[str, Any]] = None) -> None:
        """fit_report.json, histogram.csv and iteration_curve.csv under ``out_dir``."""
        out_dir = Path(out_dir)
        payload = self.to_dict()
        payload["config"] = config or {}
        write_json(payload, out_dir / "fit_report.json")
        write_csv(self.summary.histogram_frame(), out_dir / "histogram.csv", provenance)
        write_csv(self.summary.curve_frame(), out_dir / "iteration_curve.csv", provenance)
