"""Subcommand registration."""

from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

import typer
from loguru import logger

from ..config.run_config import parse_config
from ..core.exceptions import ConfigurationError
from ..core.types import Command
from .runner import EXIT_USAGE, CommandRunner

ConfigOption = Annotated[Optional[Path], typer.Option("--config", "-c", help="JSON run configuration")]
SetOption = Annotated[Optional[List[str]], typer.Option("--set", help="Override, e.g. molecule.gamma2=0.02")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Seed for every random draw")]
WorkersOption = Annotated[Optional[int], typer.Option("--workers", help="Worker processes")]
OutOption = Annotated[Optional[str], typer.Option("--out", help="Output directory")]
TraceOption = Annotated[Optional[Path], typer.Option("--trace", help="PL trace CSV (beta_fs2, pl_cps)")]
DatasetOption = Annotated[Optional[Path], typer.Option("--dataset", help="Dataset CSV from gen-dataset")]
ModelOption = Annotated[Optional[Path], typer.Option("--model", help="Model JSON from train")]


def register_commands(app: typer.Typer, runner: CommandRunner) -> None:

    def dispatch(name: Command, config: Optional[Path], overrides: Optional[List[str]], seed: Optional[int],
                 workers: Optional[int], out: Optional[str], args: Dict[str, Any]) -> None:
        try:
            defaults = {"workers": runner.settings.run.workers, "out": runner.settings.run.output_dir}
            run_config = parse_config(str(config) if config else None, overrides or [], seed, workers, out,
                                      defaults)
        except ConfigurationError as e:
            logger.error(f"Configuration rejected: {e.message}")
            typer.echo(f"Error: {e.message}", err=True)
            raise typer.Exit(EXIT_USAGE)
        raise typer.Exit(runner.run_command(name.value, run_config, args))

    @app.command(Command.SIMULATE.value)
    def simulate(config: ConfigOption = None, set_: SetOption = None, seed: SeedOption = None,
                 workers: WorkersOption = None, out: OutOption = None,
                 beta: Annotated[float, typer.Option(help="Chirp in fs^2")] = 0.0,
                 tau: Annotated[float, typer.Option(help="Mask delay in fs")] = 0.0):
        """Density-matrix trajectory for one shaped pulse."""
        dispatch(Command.SIMULATE, config, set_, seed, workers, out, {"beta": beta, "tau": tau})

    @app.command(Command.PULSE.value)
    def pulse(config: ConfigOption = None, set_: SetOption = None, seed: SeedOption = None,
              workers: WorkersOption = None, out: OutOption = None,
              beta: Annotated[float, typer.Option(help="Chirp in fs^2")] = 0.0,
              tau: Annotated[float, typer.Option(help="Mask delay in fs")] = 0.0,
              half_window: Annotated[float, typer.Option(help="Dump |t| up to this many fs")] = 500.0):
        """Time-domain field of one shaped pulse."""
        dispatch(Command.PULSE, config, set_, seed, workers, out,
                 {"beta": beta, "tau": tau, "half_window": half_window})

    @app.command(Command.TRACE.value)
    def trace(config: ConfigOption = None, set_: SetOption = None, seed: SeedOption = None,
              workers: WorkersOption = None, out: OutOption = None,
              tau: Annotated[float, typer.Option(help="Mask delay in fs")] = 0.0):
        """PL versus chirp at the configured molecular parameters."""
        dispatch(Command.TRACE, config, set_, seed, workers, out, {"tau": tau})

    @app.command(Command.SURFACE.value)
    def surface(config: ConfigOption = None, set_: SetOption = None, seed: SeedOption = None,
                workers: WorkersOption = None, out: OutOption = None):
        """Steady S1 population over the (tau, beta) plane."""
        dispatch(Command.SURFACE, config, set_, seed, workers, out, {})

    @app.command(Command.GEN_DATASET.value)
    def gen_dataset(config: ConfigOption = None, set_: SetOption = None, seed: SeedOption = None,
                    workers: WorkersOption = None, out: OutOption = None):
        """Sample targets and simulate their PL traces."""
        dispatch(Command.GEN_DATASET, config, set_, seed, workers, out, {})

    @app.command(Command.FIT.value)
    def fit(trace: TraceOption = None, config: ConfigOption = None, set_: SetOption = None,
            seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Multi-start simplex fit of a PL trace."""
        dispatch(Command.FIT, config, set_, seed, workers, out, {"trace": trace})

    @app.command(Command.LAMBDA_SCAN.value)
    def lambda_scan(trace: TraceOption = None, config: ConfigOption = None, set_: SetOption = None,
                    seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Repeat the free-E2 fit for each penalty weight in fit.lambdas."""
        dispatch(Command.LAMBDA_SCAN, config, set_, seed, workers, out, {"trace": trace})

    @app.command(Command.TRAIN.value)
    def train(dataset: DatasetOption = None, config: ConfigOption = None, set_: SetOption = None,
              seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Train the regressor and report test-split metrics."""
        dispatch(Command.TRAIN, config, set_, seed, workers, out, {"dataset": dataset})

    @app.command(Command.EVALUATE.value)
    def evaluate(model: ModelOption = None, dataset: DatasetOption = None, config: ConfigOption = None,
                 set_: SetOption = None, seed: SeedOption = None, workers: WorkersOption = None,
                 out: OutOption = None):
        """Metrics of a saved model on the test split of a dataset."""
        dispatch(Command.EVALUATE, config, set_, seed, workers, out, {"model": model, "dataset": dataset})

    @app.command(Command.PREDICT.value)
    def predict(model: ModelOption = None, trace: TraceOption = None, config: ConfigOption = None,
                set_: SetOption = None, seed: SeedOption = None, workers: WorkersOption = None,
                out: OutOption = None):
        """Molecular parameters for one PL trace."""
        dispatch(Command.PREDICT, config, set_, seed, workers, out, {"model": model, "trace": trace})

    @app.command(Command.SWEEP_ARCH.value)
    def sweep_arch(dataset: DatasetOption = None, config: ConfigOption = None, set_: SetOption = None,
                   seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Bagged bias-variance decomposition per architecture."""
        dispatch(Command.SWEEP_ARCH, config, set_, seed, workers, out, {"dataset": dataset})

    @app.command(Command.HYPER_GRID.value)
    def hyper_grid(dataset: DatasetOption = None, config: ConfigOption = None, set_: SetOption = None,
                   seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Batch size x learning rate grid of best MSEs."""
        dispatch(Command.HYPER_GRID, config, set_, seed, workers, out, {"dataset": dataset})

    @app.command(Command.SWEEP_DROPOUT.value)
    def sweep_dropout(dataset: DatasetOption = None, config: ConfigOption = None, set_: SetOption = None,
                      seed: SeedOption = None, workers: WorkersOption = None, out: OutOption = None):
        """Training curves per dropout probability."""
        dispatch(Command.SWEEP_DROPOUT, config, set_, seed, workers, out, {"dataset": dataset})
