import logging
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv
from rich.logging import RichHandler

from survensemble.errors import ConfigError


@dataclass(frozen=True)
class Settings:
    workers: int
    log_level: str
    output_dir: Path


def get_settings() -> Settings:
    """Read runtime settings from the environment (and a local .env file, if present)."""
    load_dotenv(override=True)
    raw_workers = os.getenv("SURVENSEMBLE_WORKERS", "1")
    try:
        workers = int(raw_workers)
    except ValueError as error:
        raise ConfigError(f"SURVENSEMBLE_WORKERS must be an integer, got {raw_workers!r}") from error
    if workers == 0 or workers < -1:
        raise ConfigError(f"SURVENSEMBLE_WORKERS must be positive or -1, got {workers}")
    log_level = os.getenv("SURVENSEMBLE_LOG_LEVEL", "WARNING").upper()
    if log_level not in logging.getLevelNamesMapping():
        raise ConfigError(f"Unknown SURVENSEMBLE_LOG_LEVEL: {log_level}")
    return Settings(
        workers=workers,
        log_level=log_level,
        output_dir=Path(os.getenv("SURVENSEMBLE_OUTPUT_DIR", "results")),
    )


def configure_logging(level: str = "WARNING") -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True)],
    )
