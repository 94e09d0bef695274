"""Launcher for LoRA supervised fine-tuning from exported instruction datasets."""

__version__ = "0.1.0"

from .errors import AdapterError, ConfigError, DataError
from .launch import (
    AdapterConfig,
    TrainingPlan,
    TrainLaunchSpec,
    load_and_validate,
    load_config,
    load_samples,
)

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "ConfigError",
    "DataError",
    "TrainLaunchSpec",
    "TrainingPlan",
    "load_and_validate",
    "load_config",
    "load_samples",
    "__version__",
]
