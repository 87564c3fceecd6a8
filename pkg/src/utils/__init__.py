"""Errors, seeding and hashing helpers, and logging setup."""

from src.utils.errors import (
    ConfigError,
    DegenerateGradientError,
    MursslError,
    NumericalError,
    ShapeError,
    UsageError,
)
from src.utils.helpers import config_hash, derive_seed, make_rng, mean_and_std
from src.utils.logger import setup_logging

__all__ = [
    "ConfigError",
    "DegenerateGradientError",
    "MursslError",
    "NumericalError",
    "ShapeError",
    "UsageError",
    "config_hash",
    "derive_seed",
    "make_rng",
    "mean_and_std",
    "setup_logging",
]
