"""Validation of exported training inputs.

The launcher consumes two artifacts from the dataset exporter: a LoRA
training config (one JSON object) and instruction JSONL splits. Nothing
in this module touches model weights, so a dry run can stop after
load_and_validate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError

SAMPLE_KEYS = ("instruction", "input", "output")


@dataclass(frozen=True)
class TrainLaunchSpec:
    """What the operator asked for: input files, output directory, mode."""

    config_path: Path
    train_path: Path
    val_path: Path
    output_dir: Path
    dry_run: bool = False


@dataclass(frozen=True)
class AdapterConfig:
    """Deserialized LoRA training config.

    Mirrors the exporter's invariants; a file that fails them was not
    produced by the exporter and is rejected rather than repaired.
    """

    base_model_id: str
    lora_r: int
    lora_alpha: int
    target_modules: tuple[str, ...]
    batch_size: int
    learning_rate: float
    max_steps: int
    warmup_steps: int

    def __post_init__(self):
        if not self.base_model_id:
            raise ConfigError("base_model_id must be non-empty")
        if self.lora_r < 1 or self.lora_alpha < 1:
            raise ConfigError("lora_r and lora_alpha must be positive")
        if not self.target_modules:
            raise ConfigError("target_modules must be non-empty")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ConfigError("batch_size and max_steps must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.warmup_steps < 0 or self.warmup_steps > self.max_steps:
            raise ConfigError("warmup_steps must lie in [0, max_steps]")

    def echo(self) -> str:
        """One-line summary of the resolved hyperparameters."""
        return (
            f"r={self.lora_r} alpha={self.lora_alpha}"
            f" targets={','.join(self.target_modules)}"
            f" batch_size={self.batch_size} lr={self.learning_rate!r}"
            f" steps={self.max_steps} warmup={self.warmup_steps}"
        )

    def to_mapping(self) -> dict:
        return {
            "base_model_id": self.base_model_id,
            "lora_r": self.lora_r,
            "lora_alpha": self.lora_alpha,
            "target_modules": list(self.target_modules),
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "max_steps": self.max_steps,
            "warmup_steps": self.warmup_steps,
        }


@dataclass(frozen=True)
class TrainingPlan:
    """Everything train() needs, fully validated."""

    config: AdapterConfig
    train_samples: tuple[dict, ...]
    val_samples: tuple[dict, ...]
    output_dir: Path


def _require_int(data: dict, key: str) -> int:
    value = data[key]
    # bool is an int subclass; a config saying "batch_size": true is garbage
    if type(value) is not int:
        raise ConfigError(f"config field {key!r} must be an integer")
    return value


def load_config(path: str | Path) -> AdapterConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")

    expected = {
        "base_model_id", "lora_r", "lora_alpha", "target_modules",
        "batch_size", "learning_rate", "max_steps", "warmup_steps",
    }
    for key in expected:
        if key not in data:
            raise ConfigError(f"config is missing {key!r}")
    for key in data:
        if key not in expected:
            raise ConfigError(f"config sets unknown field {key!r}")

    if not isinstance(data["base_model_id"], str):
        raise ConfigError("config field 'base_model_id' must be a string")
    modules = data["target_modules"]
    if not isinstance(modules, list) or not all(isinstance(m, str) and m for m in modules):
        raise ConfigError("config field 'target_modules' must be a list of names")
    lr = data["learning_rate"]
    if type(lr) not in (int, float):
        raise ConfigError("config field 'learning_rate' must be a number")

    return AdapterConfig(
        base_model_id=data["base_model_id"],
        lora_r=_require_int(data, "lora_r"),
        lora_alpha=_require_int(data, "lora_alpha"),
        target_modules=tuple(modules),
        batch_size=_require_int(data, "batch_size"),
        learning_rate=float(lr),
        max_steps=_require_int(data, "max_steps"),
        warmup_steps=_require_int(data, "warmup_steps"),
    )


def load_samples(path: str | Path) -> list[dict]:
    """Read one instruction JSONL split; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"split file {path} does not exist")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: not a JSON object")
            for key in SAMPLE_KEYS:
                if key not in obj or not isinstance(obj[key], str):
                    raise DataError(f"{path}:{lineno}: missing or non-string {key!r}")
            for key in obj:
                if key not in SAMPLE_KEYS:
                    raise DataError(f"{path}:{lineno}: unexpected key {key!r}")
            samples.append(obj)
    return samples


def load_and_validate(spec: TrainLaunchSpec) -> TrainingPlan:
    """Resolve a launch spec into a validated training plan.

    Touches only the three input files; never the output directory, so
    dry runs stay side-effect free.
    """
    config = load_config(spec.config_path)
    train_samples = load_samples(spec.train_path)
    val_samples = load_samples(spec.val_path)
    if not train_samples:
        raise DataError(f"{spec.train_path}: no training samples")
    return TrainingPlan(
        config=config,
        train_samples=tuple(train_samples),
        val_samples=tuple(val_samples),
        output_dir=Path(spec.output_dir),
    )
