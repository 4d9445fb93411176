"""Configuration module for the PL toolkit.

Process settings come from pydantic-settings; run settings from RunConfig.
"""

from .run_config import RunConfig, parse_config
from .settings import Settings, get_settings

__all__ = ["Settings", "get_settings", "RunConfig", "parse_config"]
