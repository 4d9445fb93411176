"""Plain-text summaries printed after each command."""

from typing import Dict, Sequence

import numpy as np

from ..core.types import TARGET_NAMES
from ..services.mlp_regressor import EvaluationReport
from ..services.model_selection import BiasVarianceRow, GridResult
from ..services.pl_forward import PLTrace
from ..services.simplex_fitter import EnsembleSummary, LambdaScanRow


def format_trace(trace: PLTrace) -> str:
    peak = int(np.argmax(trace.values))
    return (
        f"PL trace over {len(trace)} chirps: peak {trace.values[peak]:.2f} cps at beta = "
        f"{trace.betas[peak]:.0f} fs^2, min {trace.values.min():.2f} cps"
    )


def format_summary(summary: EnsembleSummary) -> str:
    if summary.empty:
        return f"No converged starts out of {summary.n_total}"
    lines = [f"{summary.n_retained}/{summary.n_total} starts retained"]
    for name in summary.names:
        lines.append(f"- {name}: {summary.mean[name]:.6g} +/- {summary.std[name]:.3g}")
    return "\n".join(lines)


def format_lambda_scan(rows: Sequence[LambdaScanRow]) -> str:
    return "\n".join(
        f"- lambda {r.lam:g}: {r.n_converged} converged, mean |E2 - 2w0| {r.mean_abs_detuning:.4g} cm^-1, "
        f"mean MSE {r.mean_mse:.4g} cps^2"
        for r in rows
    )


def format_metrics(report: EvaluationReport) -> str:
    lines = ["target      rmse        mae         r2"]
    for name in TARGET_NAMES:
        m = report.scaled[name]
        lines.append(f"{name:<11} {m.rmse:<11.4g} {m.mae:<11.4g} {m.r2:.4f}")
    return "\n".join(lines)


def format_prediction(prediction: Dict[str, float]) -> str:
    return "\n".join(f"- {name}: {value:.6g}" for name, value in prediction.items())


def format_bias_variance(rows: Sequence[BiasVarianceRow]) -> str:
    lines = [
        f"- ID {r.arch_id} {list(r.hidden_sizes)}: bias2 {r.bias2:.4g}, variance {r.variance:.4g}, "
        f"total {r.total:.4g}"
        for r in rows
    ]
    finite = [r for r in rows if np.isfinite(r.total)]
    if finite:
        best = min(finite, key=lambda r: r.total)
        lines.append(f"Lowest total error at ID {best.arch_id}")
    return "\n".join(lines)


def format_grid(grid: GridResult) -> str:
    bs, lr = grid.best_cell
    return f"Best validation MSE {np.min(grid.best_val):.4g} at Bs={bs}, lr={lr:g}"
