from typing import Any, Callable

import typer
from loguru import logger

from ..config.logging import setup_logging
from ..config.run_config import RunConfig
from ..config.settings import Settings, get_settings
from .commands import register_commands
from .runner import CommandRunner, default_model_factory


class CLIApplication:
    def __init__(self, settings: Settings):
        self.settings = settings
        self.logger = logger.bind(component="cli")

        self.logger.info("Building command-line application")
        self.app = typer.Typer(
            name="plsim",
            help="Photoluminescence under shaped pulses: simulate, fit and learn molecular parameters.",
            no_args_is_help=True,
            add_completion=False,
        )

        self._initialized = False

    def initialize(self, runner: CommandRunner) -> None:
        try:
            register_commands(self.app, runner)
            self._initialized = True
            self.logger.info(f"Registered commands: {', '.join(runner.commands)}")

        except Exception as e:
            self.logger.error(f"Failed to initialize CLI: {e}")
            raise

    def run(self) -> None:
        if not self._initialized:
            raise RuntimeError("CLI not initialized. Call initialize() first.")

        setup_logging(self.settings)
        self.app()

    def is_initialized(self) -> bool:
        return self._initialized


def create_cli_app(settings: Settings = None,
                   model_factory: Callable[[RunConfig], Any] = default_model_factory) -> CLIApplication:
    if settings is None:
        settings = get_settings()

    application = CLIApplication(settings)
    application.initialize(CommandRunner(settings, model_factory))
    return application
