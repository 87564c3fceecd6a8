"""Experiment configuration loading and validation."""

from config.config_loader import (
    ConfigLoader,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    get_config,
    reload_config,
    validate_config,
)

__all__ = [
    "ConfigLoader",
    "ExperimentConfig",
    "apply_overrides",
    "config_from_dict",
    "config_to_dict",
    "get_config",
    "reload_config",
    "validate_config",
]
