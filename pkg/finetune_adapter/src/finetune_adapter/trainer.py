"""Desk-scale LoRA training loop.

Checkpoints for the configured base models are multi-gigabyte downloads,
so the launcher ships a tiny stand-in network whose projection modules
carry the standard names (q_proj, k_proj, v_proj, o_proj) and trains
low-rank adapters over its frozen random weights. The loop itself
follows the exported config faithfully: batch size, learning-rate
warmup, periodic validation, optional plateau decay, adapter
serialization.

Choices the config does not state, recorded in the loss log header:
SGD optimizer, float32 precision, mean squared error over hashed
character features of the output text only (instruction and input
contribute model features, never loss).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import ConfigError
from .launch import AdapterConfig, TrainingPlan

FEATURE_DIM = 64
LOG_NAME = "loss_log.jsonl"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def text_features(text: str, dim: int = FEATURE_DIM) -> list[float]:
    """L2-normalized bag of hashed character trigrams."""
    counts = [0.0] * dim
    for i in range(len(text) - 2):
        digest = _FNV_OFFSET
        for byte in text[i : i + 3].encode("utf-8"):
            digest = ((digest ^ byte) * _FNV_PRIME) & _MASK64
        counts[digest % dim] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        return counts
    return [c / norm for c in counts]


class LoraLinear(torch.nn.Module):
    """Frozen linear plus a trainable low-rank delta.

    Standard init (A small random, B zero) keeps the wrapped module's
    output identical to the base until the first optimizer step.
    """

    def __init__(self, base: torch.nn.Linear, r: int, alpha: int):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.lora_a = torch.nn.Parameter(torch.randn(r, base.in_features) * 0.02)
        self.lora_b = torch.nn.Parameter(torch.zeros(base.out_features, r))
        self.scaling = alpha / r

    def forward(self, x):
        return self.base(x) + torch.nn.functional.linear(x, self.lora_b @ self.lora_a) * self.scaling


class StandInModel(torch.nn.Module):
    """One attention-flavored block standing in for a full language model."""

    def __init__(self, dim: int = FEATURE_DIM):
        super().__init__()
        self.q_proj = torch.nn.Linear(dim, dim, bias=False)
        self.k_proj = torch.nn.Linear(dim, dim, bias=False)
        self.v_proj = torch.nn.Linear(dim, dim, bias=False)
        self.o_proj = torch.nn.Linear(dim, dim, bias=False)
        for param in self.parameters():
            param.requires_grad_(False)
        self._scale = 1.0 / math.sqrt(dim)

    def forward(self, x):
        q, k, v = self.q_proj(x), self.k_proj(x), self.v_proj(x)
        gate = torch.sigmoid((q * k).sum(dim=-1, keepdim=True) * self._scale)
        return self.o_proj(gate * v)


def apply_lora(model: torch.nn.Module, config: AdapterConfig) -> list[str]:
    """Wrap the targeted projections in place; returns the wrapped names."""
    children = dict(model.named_children())
    for name in config.target_modules:
        if name not in children or not isinstance(children[name], torch.nn.Linear):
            raise ConfigError(f"target module {name!r} not present in the model")
    for name in config.target_modules:
        setattr(model, name, LoraLinear(children[name], config.lora_r, config.lora_alpha))
    return list(config.target_modules)


@dataclass(frozen=True)
class TrainResult:
    adapter_dir: Path
    log_path: Path
    steps_run: int
    final_train_loss: float
    final_val_loss: float | None
    lr_adjustments: int


def _warmup_lr(base_lr: float, step: int, warmup_steps: int) -> float:
    """Linear ramp over the first warmup_steps steps (1-based), then flat."""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)


def _feature_matrix(samples, render) -> torch.Tensor:
    return torch.tensor([text_features(render(s)) for s in samples], dtype=torch.float32)


def train(
    plan: TrainingPlan,
    *,
    seed: int = 0,
    eval_every: int = 50,
    plateau_decay: bool = False,
    patience: int = 3,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Run the configured number of LoRA steps and save the adapter.

    plateau_decay halves the post-warmup learning rate whenever
    `patience` consecutive validations fail to improve; left off, the
    rate stays constant after warmup.
    """
    if eval_every < 1:
        raise ConfigError("eval_every must be positive")
    if patience < 1:
        raise ConfigError("patience must be positive")
    config = plan.config
    out_dir = Path(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = Path(log_path) if log_path is not None else out_dir / LOG_NAME

    torch.manual_seed(seed)
    model = StandInModel()
    apply_lora(model, config)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.SGD(trainable, lr=config.learning_rate)

    inputs = _feature_matrix(plan.train_samples, lambda s: s["instruction"] + "\n" + s["input"])
    targets = _feature_matrix(plan.train_samples, lambda s: s["output"])
    if plan.val_samples:
        val_inputs = _feature_matrix(plan.val_samples, lambda s: s["instruction"] + "\n" + s["input"])
        val_targets = _feature_matrix(plan.val_samples, lambda s: s["output"])

    def batch_rows(step: int) -> torch.Tensor:
        n = inputs.shape[0]
        start = (step * config.batch_size) % n
        rows = [(start + k) % n for k in range(min(config.batch_size, n))]
        return torch.tensor(rows)

    base_lr = config.learning_rate
    best_val = math.inf
    stale = 0
    adjustments = 0
    final_loss = math.nan
    final_val: float | None = None

    with open(log_path, "w", encoding="utf-8") as log:
        def emit(event: dict) -> None:
            log.write(json.dumps(event) + "\n")
            log.flush()

        emit(
            {
                "event": "start",
                "optimizer": "sgd",
                "precision": "float32",
                "loss": "mse",
                "masking": "loss over hashed output features only;"
                " instruction and input are model features",
                "feature_dim": FEATURE_DIM,
                "seed": seed,
                "train_samples": len(plan.train_samples),
                "val_samples": len(plan.val_samples),
                "config": config.to_mapping(),
            }
        )

        for step in range(1, config.max_steps + 1):
            lr = _warmup_lr(base_lr, step, config.warmup_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr
            rows = batch_rows(step - 1)
            optimizer.zero_grad()
            loss = torch.nn.functional.mse_loss(model(inputs[rows]), targets[rows])
            loss.backward()
            optimizer.step()
            final_loss = float(loss.item())
            emit({"event": "step", "step": step, "lr": lr, "loss": final_loss})

            if plan.val_samples and (step % eval_every == 0 or step == config.max_steps):
                with torch.no_grad():
                    val_loss = float(
                        torch.nn.functional.mse_loss(model(val_inputs), val_targets).item()
                    )
                final_val = val_loss
                emit({"event": "val", "step": step, "val_loss": val_loss})
                if val_loss < best_val - 1e-12:
                    best_val = val_loss
                    stale = 0
                else:
                    stale += 1
                    if plateau_decay and stale >= patience:
                        base_lr /= 2.0
                        stale = 0
                        adjustments += 1
                        emit({"event": "lr_adjust", "step": step, "learning_rate": base_lr})

        adapter_dir = out_dir / "adapter"
        adapter_dir.mkdir(exist_ok=True)
        state = {
            name: {
                "lora_a": getattr(model, name).lora_a.detach().clone(),
                "lora_b": getattr(model, name).lora_b.detach().clone(),
            }
            for name in config.target_modules
        }
        torch.save(state, adapter_dir / "adapter_model.pt")
        adapter_config = config.to_mapping()
        adapter_config["feature_dim"] = FEATURE_DIM
        adapter_config["seed"] = seed
        (adapter_dir / "adapter_config.json").write_text(
            json.dumps(adapter_config, indent=2) + "\n", encoding="utf-8"
        )
        emit({"event": "end", "steps": config.max_steps, "adapter_dir": str(adapter_dir)})

    return TrainResult(
        adapter_dir=adapter_dir,
        log_path=log_path,
        steps_run=config.max_steps,
        final_train_loss=final_loss,
        final_val_loss=final_val,
        lr_adjustments=adjustments,
    )
