"""Logging configuration setup."""

import sys
from typing import Any, Dict

from loguru import logger

from .settings import Settings, get_settings

DEBUG_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{extra[component]}</cyan> - <level>{message}</level>"
)


def _sink_options(settings: Settings) -> Dict[str, Any]:
    return {
        "level": settings.logging.level,
        "format": settings.logging.format,
        "backtrace": True,
        "diagnose": False,
    }


def setup_logging(settings: Settings = None) -> None:
    """Configure loguru sinks from settings.

    Every record carries a ``component`` extra; classes and modules bind their
    own, anything else logs as ``-``.
    """
    settings = settings or get_settings()

    logger.remove()
    logger.configure(extra={"component": "-"})
    logger.add(sys.stderr, colorize=True, **_sink_options(settings))

    if settings.logging.file_path:
        logger.add(
            settings.logging.file_path,
            rotation=settings.logging.rotation,
            retention=settings.logging.retention,
            compression="zip",
            **_sink_options(settings),
        )

    # simplex iterations and training epochs log at DEBUG
    if settings.environment == "development" and settings.logging.level != "DEBUG":
        logger.add(
            sys.stderr,
            level="DEBUG",
            format=DEBUG_FORMAT,
            colorize=True,
            filter=lambda record: record["level"].name == "DEBUG",
        )

    logger.debug(f"Logging configured for {settings.environment} environment at {settings.logging.level}")
    if settings.logging.file_path:
        logger.info(f"Log file: {settings.logging.file_path}")
