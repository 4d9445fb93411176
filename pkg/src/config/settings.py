from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings read from PLSIM_* environment variables or .env."""

    # Logging settings
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field("INFO")
    log_format: str = Field(
        "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[component]: <16} | {message}"
    )
    log_file_path: Optional[str] = Field(None)
    log_rotation: str = Field("1 day")
    log_retention: str = Field("30 days")

    # Run defaults, overridden per command by --workers / --out
    workers: int = Field(1, ge=1)
    output_dir: str = Field("runs")

    # General settings
    environment: Literal["development", "production"] = Field("production")

    model_config = SettingsConfigDict(
        env_prefix="PLSIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @property
    def logging(self):
        """Logging configuration namespace."""
        class LoggingConfig:
            def __init__(self, settings):
                self.level = settings.log_level
                self.format = settings.log_format
                self.file_path = settings.log_file_path
                self.rotation = settings.log_rotation
                self.retention = settings.log_retention
        return LoggingConfig(self)

    @property
    def run(self):
        """Run defaults namespace."""
        class RunDefaults:
            def __init__(self, settings):
                self.workers = settings.workers
                self.output_dir = settings.output_dir
        return RunDefaults(self)


@lru_cache()
def get_settings() -> Settings:
    return Settings()
