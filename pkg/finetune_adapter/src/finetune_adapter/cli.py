"""Command line launcher.

Exit codes: 0 success, 2 configuration error, 3 data error. Dry runs
stop after validation and write nothing except an optional plan log;
training errors from the environment propagate unwrapped.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError
from .launch import TrainLaunchSpec, load_and_validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finetune-adapter",
        description="Launch LoRA fine-tuning from exported instruction data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", required=True, help="LoRA training config JSON")
    parser.add_argument("--train", required=True, help="training split JSONL")
    parser.add_argument("--val", required=True, help="validation split JSONL")
    parser.add_argument("--out", required=True, help="output directory for adapter and log")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate inputs and stop before training")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--eval-every", type=int, default=50,
                        help="steps between validation passes")
    parser.add_argument("--plateau-decay", action="store_true",
                        help="halve the learning rate when validation stops improving")
    parser.add_argument("--patience", type=int, default=3,
                        help="non-improving validations before a plateau decay")
    parser.add_argument("--log", help="loss log path (default: OUT/loss_log.jsonl)")
    return parser


def run(args: argparse.Namespace) -> int:
    spec = TrainLaunchSpec(
        config_path=Path(args.config),
        train_path=Path(args.train),
        val_path=Path(args.val),
        output_dir=Path(args.out),
        dry_run=args.dry_run,
    )
    plan = load_and_validate(spec)
    print(
        f"plan: {plan.config.echo()}"
        f" train={len(plan.train_samples)} val={len(plan.val_samples)}"
    )
    if spec.dry_run:
        if args.log:
            Path(args.log).write_text(
                json.dumps(
                    {
                        "event": "plan",
                        "config": plan.config.to_mapping(),
                        "train_samples": len(plan.train_samples),
                        "val_samples": len(plan.val_samples),
                    }
                )
                + "\n",
                encoding="utf-8",
            )
        print("dry run: no training performed")
        return EXIT_OK

    from .trainer import train  # torch import deferred past validation

    result = train(
        plan,
        seed=args.seed,
        eval_every=args.eval_every,
        plateau_decay=args.plateau_decay,
        patience=args.patience,
        log_path=args.log,
    )
    summary = f"adapter saved to {result.adapter_dir}; {result.steps_run} steps"
    summary += f", final loss {result.final_train_loss:.6f}"
    if result.final_val_loss is not None:
        summary += f", final val loss {result.final_val_loss:.6f}"
    print(summary)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
