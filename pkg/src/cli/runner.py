"""Command execution: RunConfig + arguments -> artifacts + exit status."""

from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
import typer
from loguru import logger

from ..config.run_config import RunConfig
from ..config.settings import Settings, get_settings
from ..core.exceptions import ConfigurationError, PLSimError
from ..core.types import TARGET_NAMES, Command, Scenario, TrainConfig
from ..services.artifacts import read_csv, write_csv, write_json
from ..services.dataset_factory import DatasetFactory, PLDataset, sample_initial_conditions, split_dataset
from ..services.field_shaper import FrequencyGrid, cached_field, pulse_end_time
from ..services.lindblad_engine import evolve
from ..services.mlp_regressor import TrainedModel, evaluate, predict_params, predictions_frame, train
from ..services.model_selection import bias_variance_frame, bias_variance_sweep, dropout_sweep, hyperparameter_grid
from ..services.pl_forward import ForwardModel, PLTrace, beta_grid
from ..services.simplex_fitter import FitReport, lambda_scan, lambda_scan_frame, multi_start_fit
from . import formatting

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def default_model_factory(config: RunConfig) -> ForwardModel:
    return ForwardModel(
        pulse=config.pulse.to_spec(),
        time_grid=config.time_grid.to_grid(),
        freq_grid=FrequencyGrid.for_time_step(config.field_grid.dt, config.field_grid.n),
        scaling=config.scaling.to_scaling(),
        rotating_wave=config.solver.rotating_wave,
        analytic_tail=config.solver.analytic_tail,
        workers=config.workers,
    )


class CommandRunner:
    """Runs one subcommand and maps domain errors onto exit codes."""

    def __init__(self, settings: Settings = None,
                 model_factory: Callable[[RunConfig], Any] = default_model_factory):
        self.settings = settings or get_settings()
        self.model_factory = model_factory
        self.logger = logger.bind(component="cli_runner")
        self._handlers: Dict[str, Callable[[RunConfig, Dict[str, Any]], None]] = {
            Command.SIMULATE.value: self._simulate,
            Command.PULSE.value: self._pulse,
            Command.TRACE.value: self._trace,
            Command.SURFACE.value: self._surface,
            Command.GEN_DATASET.value: self._gen_dataset,
            Command.FIT.value: self._fit,
            Command.LAMBDA_SCAN.value: self._lambda_scan,
            Command.TRAIN.value: self._train,
            Command.EVALUATE.value: self._evaluate,
            Command.PREDICT.value: self._predict,
            Command.SWEEP_ARCH.value: self._sweep_arch,
            Command.HYPER_GRID.value: self._hyper_grid,
            Command.SWEEP_DROPOUT.value: self._sweep_dropout,
        }

    @property
    def commands(self):
        return sorted(self._handlers)

    def run_command(self, name: str, config: RunConfig, args: Optional[Dict[str, Any]] = None) -> int:
        handler = self._handlers.get(name)
        if handler is None:
            typer.echo(f"Usage: unknown command '{name}'; expected one of {', '.join(self.commands)}", err=True)
            return EXIT_USAGE
        self.logger.info(f"Running {name} (seed={config.seed}, workers={config.workers}, out={config.out})")
        try:
            handler(config, args or {})
        except ConfigurationError as e:
            typer.echo(f"Error: {e.message}", err=True)
            return EXIT_USAGE
        except PLSimError as e:
            self.logger.error(f"{name} failed: {e.message}")
            typer.echo(f"Error: {e.message}", err=True)
            return EXIT_RUNTIME
        self.logger.info(f"{name} finished")
        return EXIT_OK

    # -- helpers ----------------------------------------------------------

    def _out(self, config: RunConfig, filename: str) -> Path:
        return Path(config.out) / filename

    def _provenance(self, name: str, config: RunConfig) -> Dict[str, Any]:
        return {"command": name, "seed": config.seed, "config": config.echo()}

    def _csv(self, name: str, config: RunConfig, frame, filename: str) -> Path:
        path = write_csv(frame, self._out(config, filename), self._provenance(name, config))
        self.logger.info(f"Wrote {path}")
        return path

    def _json(self, config: RunConfig, payload: Dict[str, Any], filename: str) -> Path:
        payload = {**payload, "config": config.echo()}
        path = write_json(payload, self._out(config, filename))
        self.logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def _require_path(args: Dict[str, Any], key: str) -> Path:
        value = args.get(key)
        if not value:
            raise ConfigurationError(f"--{key} is required")
        return Path(value)

    @staticmethod
    def _betas(config: RunConfig) -> np.ndarray:
        return beta_grid(config.betas.n, config.betas.lo, config.betas.hi)

    @staticmethod
    def _taus(config: RunConfig) -> np.ndarray:
        return np.linspace(config.taus.lo, config.taus.hi, config.taus.n)

    def _load_trace(self, args: Dict[str, Any]) -> PLTrace:
        frame, _ = read_csv(self._require_path(args, "trace"))
        return PLTrace.from_frame(frame)

    def _splits(self, config: RunConfig, args: Dict[str, Any]):
        dataset = PLDataset.load(self._require_path(args, "dataset"))
        return split_dataset(dataset, config.seed)

    # -- forward model ----------------------------------------------------

    def _simulate(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = self.model_factory(config)
        spec = model.pulse.with_controls(args.get("beta", 0.0), args.get("tau", 0.0))
        table = cached_field(spec, model.freq_grid)
        trajectory = evolve(config.molecule.to_params(), table, model.time_grid, model.rotating_wave)
        self._csv(Command.SIMULATE.value, config, trajectory.to_frame(), "trajectory.csv")
        typer.echo(f"rho11(t_final) = {trajectory.final[1, 1].real:.8f}")

    def _pulse(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = self.model_factory(config)
        spec = model.pulse.with_controls(args.get("beta", 0.0), args.get("tau", 0.0))
        table = cached_field(spec, model.freq_grid)
        half = float(args.get("half_window", 500.0))
        window = table.window(-half, half)
        self._csv(Command.PULSE.value, config, window.to_frame(), "pulse.csv")
        typer.echo(f"Pulse field over [{-half:g}, {half:g}] fs; significant until "
                   f"{pulse_end_time(table):.1f} fs")

    def _trace(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = self.model_factory(config)
        trace = model.trace(config.molecule.to_params(), self._betas(config), float(args.get("tau", 0.0)))
        self._csv(Command.TRACE.value, config, trace.to_frame(), "trace.csv")
        typer.echo(formatting.format_trace(trace))

    def _surface(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = self.model_factory(config)
        surface = model.surface(config.molecule.to_params(), self._betas(config), self._taus(config))
        self._csv(Command.SURFACE.value, config, surface.to_frame(), "surface.csv")
        typer.echo(f"Control surface {surface.rho11.shape[0]} x {surface.rho11.shape[1]}, "
                   f"max rho11 {surface.rho11.max():.6g}")

    def _gen_dataset(self, config: RunConfig, args: Dict[str, Any]) -> None:
        factory = DatasetFactory(self.model_factory(config), base=config.molecule.to_params(),
                                 rows_per_job=config.dataset.rows_per_job)
        dataset = factory.generate(config.dataset.n, config.ranges.to_ranges(), self._betas(config),
                                   config.seed, config.scaling.to_scaling())
        dataset.save(self._out(config, "dataset.csv"), {"command": Command.GEN_DATASET.value,
                                                        "config": config.echo()})
        typer.echo(f"Generated {len(dataset)} rows")

    # -- simplex ----------------------------------------------------------

    def _starts(self, config: RunConfig) -> np.ndarray:
        return sample_initial_conditions(config.fit.n_starts, config.ranges.to_ranges(),
                                         include_E2=config.fit.scenario is Scenario.FREE_E2, seed=config.seed)

    def _fit(self, config: RunConfig, args: Dict[str, Any]) -> None:
        observed = self._load_trace(args)
        settings = config.fit.to_settings()
        results = multi_start_fit(observed, self._starts(config), settings, config.scaling.to_scaling(),
                                  config.ranges.to_ranges(), self.model_factory(config), config.workers,
                                  config.fit.two_photon_reference, config.molecule.to_params())
        report = FitReport.build(settings, results, config.fit.bins)
        report.write(config.out, config.echo(), self._provenance(Command.FIT.value, config))
        typer.echo(formatting.format_summary(report.summary))

    def _lambda_scan(self, config: RunConfig, args: Dict[str, Any]) -> None:
        observed = self._load_trace(args)
        starts = sample_initial_conditions(config.fit.n_starts, config.ranges.to_ranges(), include_E2=True,
                                           seed=config.seed)
        rows, _ = lambda_scan(observed, starts, config.fit.lambdas, config.fit.to_settings(),
                              config.scaling.to_scaling(), config.ranges.to_ranges(), self.model_factory(config),
                              config.workers, config.fit.two_photon_reference)
        self._csv(Command.LAMBDA_SCAN.value, config, lambda_scan_frame(rows), "lambda_scan.csv")
        typer.echo(formatting.format_lambda_scan(rows))

    # -- network ----------------------------------------------------------

    def _train(self, config: RunConfig, args: Dict[str, Any]) -> None:
        train_ds, val_ds, test_ds = self._splits(config, args)
        model = train(train_ds, val_ds, config.network_config(train_ds.n_features), config.train_config(),
                      config.dataset.scaler, config.dataset.winsor_pct)
        model.save(self._out(config, "model.json"), config.echo())
        name = Command.TRAIN.value
        self._csv(name, config, model.history.to_frame(), "history.csv")
        report = evaluate(model, test_ds)
        self._csv(name, config, report.to_frame(config.dataset.scaler.value), "metrics.csv")
        self._csv(name, config, predictions_frame(model, test_ds), "predictions.csv")
        typer.echo(formatting.format_metrics(report))

    def _evaluate(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = TrainedModel.load(self._require_path(args, "model"))
        _, _, test_ds = self._splits(config, args)
        report = evaluate(model, test_ds)
        name = Command.EVALUATE.value
        self._csv(name, config, report.to_frame(model.scalers.features.kind.value), "metrics.csv")
        self._csv(name, config, predictions_frame(model, test_ds), "predictions.csv")
        typer.echo(formatting.format_metrics(report))

    def _predict(self, config: RunConfig, args: Dict[str, Any]) -> None:
        model = TrainedModel.load(self._require_path(args, "model"))
        trace = self._load_trace(args)
        values = predict_params(model, trace.values)
        prediction = {name: float(v) for name, v in zip(TARGET_NAMES, values)}
        self._json(config, {"prediction": prediction}, "prediction.json")
        typer.echo(formatting.format_prediction(prediction))

    def _sweep_arch(self, config: RunConfig, args: Dict[str, Any]) -> None:
        train_ds, val_ds, _ = self._splits(config, args)
        sweep = config.sweep
        train_config = TrainConfig(epochs=sweep.epochs, batch_size=sweep.batch_size,
                                   learning_rate=sweep.learning_rate, patience=sweep.patience, seed=config.seed)
        rows = bias_variance_sweep(sweep.arch_ids, sweep.bags, train_ds, val_ds, train_config,
                                   config.dataset.scaler, config.seed, workers=config.workers,
                                   winsor_pct=config.dataset.winsor_pct)
        self._csv(Command.SWEEP_ARCH.value, config, bias_variance_frame(rows), "bias_variance.csv")
        typer.echo(formatting.format_bias_variance(rows))

    def _hyper_grid(self, config: RunConfig, args: Dict[str, Any]) -> None:
        train_ds, val_ds, _ = self._splits(config, args)
        grid = hyperparameter_grid(config.grid.batch_sizes, config.grid.learning_rates, train_ds, val_ds,
                                   config.grid.epochs, config.grid.patience,
                                   config.network_config(train_ds.n_features), config.dataset.scaler,
                                   config.seed, config.workers, config.dataset.winsor_pct)
        name = Command.HYPER_GRID.value
        self._csv(name, config, grid.to_frame(), "grid.csv")
        self._csv(name, config, grid.history_frame(), "grid_history.csv")
        typer.echo(formatting.format_grid(grid))

    def _sweep_dropout(self, config: RunConfig, args: Dict[str, Any]) -> None:
        train_ds, val_ds, _ = self._splits(config, args)
        base = config.train_config()
        train_config = TrainConfig(epochs=config.dropout.epochs, batch_size=base.batch_size,
                                   learning_rate=base.learning_rate,
                                   patience=min(config.dropout.patience, config.dropout.epochs), seed=config.seed)
        result = dropout_sweep(config.dropout.rates, train_ds, val_ds, config.network_config(train_ds.n_features),
                               train_config, config.dataset.scaler, config.workers, config.dataset.winsor_pct)
        name = Command.SWEEP_DROPOUT.value
        self._csv(name, config, result.to_frame(), "dropout.csv")
        self._csv(name, config, result.summary_frame(), "dropout_summary.csv")
        typer.echo(result.summary_frame().to_string(index=False))
