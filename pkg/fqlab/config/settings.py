"""
Runtime configuration.
Values come from environment variables prefixed FQLAB_ (or a .env file)
and fall back to the engine constants.
"""
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic_settings import BaseSettings, SettingsConfigDict

from fqlab.engine.constants import LAB

DEFAULT_LAB_CONFIG = Path(__file__).with_name("lab_config.yaml")


class Settings(BaseSettings):
    """Engine budgets, parallelism and logging switches."""

    # Extension degrees used for point counting
    DEFAULT_K: int = LAB.DEFAULT_K

    # Budgets
    STRATA_BUDGET: int = LAB.STRATA_BUDGET
    MINRANK_BUDGET: int = LAB.MINRANK_BUDGET
    EXHAUSTIVE_BUDGET: int = LAB.EXHAUSTIVE_BUDGET
    SLICERANK_BUDGET: int = LAB.SLICERANK_BUDGET
    GREEDY_BUDGET: int = LAB.GREEDY_BUDGET
    GREEDY_SAMPLES: int = LAB.GREEDY_SAMPLES
    ORACLE_BUDGET: int = LAB.ORACLE_BUDGET
    SECTION_BUDGET: int = LAB.SECTION_BUDGET
    SECTION_TRIES: int = LAB.SECTION_TRIES
    SECTION_CANDIDATES: int = LAB.SECTION_CANDIDATES
    SECTION_EXTENSION: int = LAB.SECTION_EXTENSION

    # Parallel enumeration
    WORKERS: int = 1
    CHUNK_SIZE: int = 1 << 14

    # Logging
    LOG_JSON: bool = True
    LOG_LEVEL: str = "WARNING"

    # Experiment defaults
    LAB_CONFIG_PATH: str = str(DEFAULT_LAB_CONFIG)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="FQLAB_",
        case_sensitive=True,
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


@lru_cache()
def load_lab_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load the experiment defaults YAML.

    Args:
        path: Optional override; defaults to Settings.LAB_CONFIG_PATH.

    Returns:
        Parsed mapping (empty when the file is blank).
    """
    target = Path(path or get_settings().LAB_CONFIG_PATH)
    with open(target, "r", encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def resolve_workers(workers: Optional[int]) -> int:
    """Explicit worker count, or the configured default."""
    if workers is None:
        workers = get_settings().WORKERS
    return max(1, int(workers))
