"""Command-line surface: typer app, command runner and text summaries."""

from .app import CLIApplication, create_cli_app
from .runner import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, CommandRunner

__all__ = ["CLIApplication", "create_cli_app", "CommandRunner", "EXIT_OK", "EXIT_RUNTIME", "EXIT_USAGE"]
