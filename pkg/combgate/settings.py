"""
Process-level settings, read from COMBGATE_* environment variables or a local
.env file, and the logging setup shared by the CLI and the HTTP app.
"""
import logging
import logging.config
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="COMBGATE_", env_file=".env", extra="ignore")

    log_config: Optional[Path] = Path("logging.ini")
    log_level: str = "INFO"
    # worker count for sweeps (processes) and budget channels (threads)
    workers: int = 1
    max_state_dim: int = 2048
    output_dir: Path = Path("out")


@lru_cache
def get_settings() -> Settings:
    return Settings()


def configure_logging(settings: Optional[Settings] = None, verbose: bool = False) -> None:
    settings = settings or get_settings()
    if settings.log_config is not None and settings.log_config.is_file():
        logging.config.fileConfig(settings.log_config, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.WARNING, format=LOG_FORMAT, datefmt="%H:%M:%S")
        logging.getLogger("combgate").setLevel(settings.log_level.upper())
    if verbose:
        logging.getLogger("combgate").setLevel(logging.DEBUG)
