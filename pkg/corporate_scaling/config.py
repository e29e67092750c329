import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

DEFAULT_MIN_GROUP_SIZE = 10


class Settings(BaseModel):
    """Environment defaults. Every field has a default, so no variable is required."""

    min_group_size: int = Field(default=DEFAULT_MIN_GROUP_SIZE, ge=3)
    log_level: str = "INFO"
    log_file: str | None = None
    fit_cache_size: int = Field(default=256, ge=1)
    workers: int = Field(default=1, ge=1)


def load_settings() -> Settings:
    """
    Read settings from a ``.env`` file (if present) and the environment.

    Recognised variables: SCALING_MIN_GROUP_SIZE, SCALING_LOG_LEVEL,
    SCALING_LOG_FILE, SCALING_FIT_CACHE_SIZE, SCALING_WORKERS.
    """
    load_dotenv()
    values = {
        "min_group_size": os.environ.get("SCALING_MIN_GROUP_SIZE"),
        "log_level": os.environ.get("SCALING_LOG_LEVEL"),
        "log_file": os.environ.get("SCALING_LOG_FILE"),
        "fit_cache_size": os.environ.get("SCALING_FIT_CACHE_SIZE"),
        "workers": os.environ.get("SCALING_WORKERS"),
    }
    return Settings(**{key: value for key, value in values.items() if value})
