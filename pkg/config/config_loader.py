"""
Configuration loader for murssl.

This module handles loading and validating experiment configuration from
YAML (or JSON) files, with support for environment variable overrides,
command-line overrides and default values.
"""

import os
import yaml
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
from dataclasses import asdict, dataclass, field, fields

from src.utils.errors import ConfigError


METHODS = ("pi", "mt", "ict", "mut")
SOLVERS = ("direct", "pga", "lagrangian-ga", "laga", "random")
DATASETS = ("two_moons", "rings")
KL_NORMALIZATIONS = ("dataset", "per_weight")


@dataclass
class ExperimentSection:
    """Run-level settings."""
    name: str = "two_moons_mut"
    method: str = "mut"
    seeds: List[int] = field(default_factory=lambda: [0])
    total_steps: int = 4000
    eval_interval: int = 100
    output_dir: str = "runs/default"
    workers: int = 1
    rr_baseline: bool = False
    save_checkpoint: bool = True


@dataclass
class DatasetConfig:
    """Synthetic dataset configuration."""
    name: str = "two_moons"
    n_train: int = 200
    n_test: int = 1000
    n_labeled: int = 6
    noise: float = 0.1
    zca: bool = False
    zca_epsilon: float = 1e-5


@dataclass
class BatchConfig:
    """Per-batch composition (labeled rows first)."""
    labeled: int = 5
    unlabeled: int = 15


@dataclass
class ModelConfig:
    """MLP classifier configuration."""
    hidden: List[int] = field(default_factory=lambda: [64, 64])
    leaky_slope: float = 0.1
    input_noise: float = 0.15
    dropout_rate: float = 0.0


@dataclass
class VbiConfig:
    """Variational dropout configuration."""
    enabled: bool = False
    init_log_sigma2: float = -10.0
    kl_normalization: str = "dataset"
    n_samples: int = 1
    sparsity_threshold: float = 3.0


@dataclass
class MurSection:
    """Maximum uncertainty regularization configuration."""
    enabled: bool = True
    solver: str = "direct"
    radius: Optional[float] = None
    radius_scale: float = 0.5
    step_size: float = 0.3
    steps: int = 5
    laga_init: str = "gradient"


@dataclass
class SchedulesConfig:
    """Ramp lengths and peak coefficients."""
    t_ru: int = 400
    t_rd: int = 800
    consistency_peak: float = 10.0
    kl_peak: float = 0.05
    mur_peak: float = 4.0
    learning_rate_peak: float = 0.1


@dataclass
class OptimizerConfig:
    """Nesterov momentum SGD configuration."""
    momentum: float = 0.9
    weight_decay: float = 1e-4


@dataclass
class TeacherConfig:
    """EMA teacher configuration (Mean Teacher and ICT)."""
    ema_momentum: Optional[float] = 0.99
    late_momentum: Optional[float] = None


@dataclass
class IctConfig:
    """Interpolation consistency configuration."""
    alpha: float = 1.0


@dataclass
class LoggingConfig:
    """Logging configuration."""
    debug_mode: bool = False
    log_level: str = "INFO"
    log_file: Optional[str] = None


@dataclass
class ExperimentConfig:
    """Main configuration class containing all sub-configurations."""
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    batch: BatchConfig = field(default_factory=BatchConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    vbi: VbiConfig = field(default_factory=VbiConfig)
    mur: MurSection = field(default_factory=MurSection)
    schedules: SchedulesConfig = field(default_factory=SchedulesConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    ict: IctConfig = field(default_factory=IctConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)


SECTION_TYPES = {f.name: f.default_factory for f in fields(ExperimentConfig)}


def _as_bool(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


def _as_int_list(value: str) -> List[int]:
    return [int(v) for v in value.replace(",", " ").split()]


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    """Nested plain-dict form, used for saving, hashing and --print-config."""
    return asdict(config)


def config_from_dict(data: Optional[Dict[str, Any]]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a nested dict; missing keys keep defaults.

    Raises:
        ConfigError: Unknown sections or keys.
    """
    data = data or {}
    problems = []
    sections = {}
    for name, value in data.items():
        if name not in SECTION_TYPES:
            problems.append(f"unknown configuration section '{name}'")
            continue
        section_cls = SECTION_TYPES[name]
        known = {f.name for f in fields(section_cls)}
        unknown = set(value or {}) - known
        if unknown:
            problems.append(f"unknown keys in '{name}': {sorted(unknown)}")
            continue
        sections[name] = section_cls(**(value or {}))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**sections)


def validate_config(config: ExperimentConfig):
    """
    Validate configuration values.

    Raises:
        ConfigError: Listing every problem found.
    """
    errors = []
    exp, ds, mur, sch = config.experiment, config.dataset, config.mur, config.schedules

    # Experiment settings
    if exp.method not in METHODS:
        errors.append(f"Method must be one of {METHODS}, got '{exp.method}'")
    if exp.total_steps <= 0:
        errors.append("Total steps must be positive")
    if exp.eval_interval <= 0:
        errors.append("Evaluation interval must be positive")
    if not exp.seeds:
        errors.append("At least one seed is required")
    if exp.workers < 1:
        errors.append("Workers must be at least 1")

    # Method requirements
    if exp.method in ("mt", "ict"):
        if config.teacher.ema_momentum is None:
            errors.append(f"Method '{exp.method}' requires teacher.ema_momentum")
        elif not (0.0 <= config.teacher.ema_momentum <= 1.0):
            errors.append("EMA momentum must be between 0.0 and 1.0")
    if config.teacher.late_momentum is not None and not (0.0 <= config.teacher.late_momentum <= 1.0):
        errors.append("Late EMA momentum must be between 0.0 and 1.0")
    if exp.method == "mut" and not mur.enabled:
        errors.append("Method 'mut' requires MUR to be enabled")
    if exp.rr_baseline and mur.radius is None and not mur.radius_scale > 0:
        errors.append("The random-regularization baseline requires a radius or a positive radius scale")

    # Dataset settings
    if ds.name not in DATASETS:
        errors.append(f"Dataset must be one of {DATASETS}, got '{ds.name}'")
    if ds.n_labeled < 2 or ds.n_labeled % 2:
        errors.append("Number of labeled examples must be even and at least 2")
    if ds.n_labeled > ds.n_train:
        errors.append("Number of labeled examples cannot exceed the training set size")
    if ds.n_test <= 0:
        errors.append("Test set size must be positive")
    if ds.noise < 0:
        errors.append("Dataset noise must be non-negative")
    if ds.zca and ds.zca_epsilon <= 0:
        errors.append("ZCA epsilon must be positive")

    # Batch settings
    if config.batch.labeled < 1:
        errors.append("Batches need at least one labeled example")
    if config.batch.unlabeled < 0:
        errors.append("Unlabeled batch count must be non-negative")

    # Model settings
    if any(w <= 0 for w in config.model.hidden):
        errors.append("Hidden widths must be positive")
    if config.model.input_noise < 0:
        errors.append("Input noise must be non-negative")
    if not (0.0 <= config.model.dropout_rate < 1.0):
        errors.append("Dropout rate must be in [0, 1)")

    # VBI settings
    if config.vbi.kl_normalization not in KL_NORMALIZATIONS:
        errors.append(f"KL normalization must be one of {KL_NORMALIZATIONS}")
    if config.vbi.n_samples < 1:
        errors.append("VBI samples must be at least 1")

    # MUR settings
    if mur.solver not in SOLVERS:
        errors.append(f"MUR solver must be one of {SOLVERS}, got '{mur.solver}'")
    if mur.radius is not None and mur.radius <= 0:
        errors.append("MUR radius must be positive")
    if mur.radius is None and mur.radius_scale <= 0:
        errors.append("MUR radius scale must be positive")
    if mur.step_size <= 0:
        errors.append("MUR step size must be positive")
    if mur.steps < 1:
        errors.append("MUR steps must be at least 1")
    if mur.laga_init not in ("gradient", "random"):
        errors.append("MUR laga_init must be 'gradient' or 'random'")

    # Schedules
    if sch.t_ru < 0 or sch.t_rd < 0:
        errors.append("Ramp lengths must be non-negative")
    if sch.t_ru + sch.t_rd > exp.total_steps:
        errors.append("Ramp-up plus ramp-down length cannot exceed total steps")
    for name in ("consistency_peak", "kl_peak", "mur_peak", "learning_rate_peak"):
        if getattr(sch, name) < 0:
            errors.append(f"Schedule {name} must be non-negative")

    # Optimizer
    if not (0.0 <= config.optimizer.momentum < 1.0):
        errors.append("Optimizer momentum must be in [0, 1)")
    if config.optimizer.weight_decay < 0:
        errors.append("Weight decay must be non-negative")

    if config.ict.alpha <= 0:
        errors.append("ICT Beta parameter must be positive")

    if errors:
        raise ConfigError(errors)


def apply_overrides(config: ExperimentConfig, overrides: Dict[str, Any]) -> ExperimentConfig:
    """
    Apply dotted-key overrides such as {'experiment.seeds': [3]} and re-validate.

    Values are taken as given, including None (e.g. mur.radius: None selects
    the data-scaled radius).
    """
    data = config_to_dict(config)
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if section not in data or key not in data[section]:
            raise ConfigError([f"unknown override '{dotted}'"])
        data[section][key] = value
    updated = config_from_dict(data)
    validate_config(updated)
    return updated


class ConfigLoader:
    """Configuration loader with validation and environment variable support."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Initialize the configuration loader.

        Args:
            config_path: Path to configuration file. If None, looks for config.yaml
                        in the project root directory.
        """
        if config_path is None:
            # Find project root (directory containing this file's parent)
            current_dir = Path(__file__).parent
            project_root = current_dir.parent
            config_path = project_root / "config.yaml"

        self.config_path = Path(config_path)
        self._config_data = None
        self._config = None

    def load(self) -> ExperimentConfig:
        """
        Load configuration from a YAML or JSON file.

        Returns:
            ExperimentConfig: Loaded and validated configuration object.

        Raises:
            FileNotFoundError: If configuration file doesn't exist.
            yaml.YAMLError: If configuration file is invalid YAML.
            ConfigError: If configuration validation fails.
        """
        if not self.config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")

        # JSON is a subset of YAML, so one parser covers both formats
        with open(self.config_path, 'r') as f:
            self._config_data = yaml.safe_load(f) or {}

        self._apply_env_overrides()
        self._config = config_from_dict(self._config_data)
        validate_config(self._config)

        return self._config

    def _apply_env_overrides(self):
        """Apply environment variable overrides to configuration."""
        env_overrides = {
            'MURSSL_METHOD': ('experiment', 'method', str),
            'MURSSL_TOTAL_STEPS': ('experiment', 'total_steps', int),
            'MURSSL_SEEDS': ('experiment', 'seeds', _as_int_list),
            'MURSSL_OUTPUT_DIR': ('experiment', 'output_dir', str),
            'MURSSL_WORKERS': ('experiment', 'workers', int),
            'MURSSL_DEBUG_MODE': ('logging', 'debug_mode', _as_bool),
            'MURSSL_LOG_LEVEL': ('logging', 'log_level', str),
        }

        for env_var, (section, key, converter) in env_overrides.items():
            if env_var in os.environ:
                value = converter(os.environ[env_var])
                if section not in self._config_data or self._config_data[section] is None:
                    self._config_data[section] = {}
                self._config_data[section][key] = value

    def save(self, config: ExperimentConfig, path: Optional[Union[str, Path]] = None):
        """
        Save configuration to YAML file.

        Args:
            config: Configuration object to save.
            path: Path to save configuration. If None, uses original path.
        """
        path = self.config_path if path is None else Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            yaml.safe_dump(config_to_dict(config), f, default_flow_style=False, sort_keys=False)


# Global configuration instance
_config_instance = None


def get_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    Get the global configuration instance.

    Args:
        config_path: Path to configuration file. Only used on first call.

    Returns:
        ExperimentConfig: Global configuration object.
    """
    global _config_instance

    if _config_instance is None:
        loader = ConfigLoader(config_path)
        _config_instance = loader.load()

    return _config_instance


def reload_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    Reload the global configuration.

    Args:
        config_path: Path to configuration file.

    Returns:
        ExperimentConfig: Reloaded configuration object.
    """
    global _config_instance

    loader = ConfigLoader(config_path)
    _config_instance = loader.load()

    return _config_instance


if __name__ == "__main__":
    # Test configuration loading
    try:
        config = get_config()
        print("Configuration loaded successfully!")
        print(f"Method: {config.experiment.method}")
        print(f"Dataset: {config.dataset.name} ({config.dataset.n_labeled} labels)")
        print(f"MUR solver: {config.mur.solver}")
        print(f"Total steps: {config.experiment.total_steps}")
    except Exception as e:
        print(f"Error loading configuration: {e}")
