"""Command line entry points: ingest, synth, build, evaluate.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 endpoint problems. Every command that writes takes an --out directory,
guards it with a lock file so concurrent runs cannot interleave, and
leaves a manifest sufficient to reproduce the run (input digests, seed,
versions). A JSON --config file can supply any long flag by name; its
values override flags given on the command line.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dataset import SourceDocument, export_bundle, merge, split
from .errors import ConfigError, DataError, GatewayError
from .evaluator import (
    build_run_manifest,
    compare,
    evaluate_model,
    load_test_split,
    write_reports,
)
from .llm_gateway import ChatCompletionClient, EndpointConfig, OfflineEmbedder, parse_resume
from .normalize import default_alias_map, load_alias_map, normalize_record
from .prompts import INSTRUCTION_VERSION
from .schema import canonical_serialize, parse_record
from .synth import SynthBatchSpec, default_profiles, generate_batch, load_profiles_dir, render_resume_text

DEFAULT_API_KEY_ENV = "RESUMEKIT_API_KEY"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ENDPOINT = 4

_LOCK_NAME = ".resumekit.lock"


class _OutDirLock:
    """One command at a time per output directory."""

    def __init__(self, out_dir: Path):
        self.path = out_dir / _LOCK_NAME
        self._fd = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"lock file {self.path} exists; another command is running "
                "(or remove the stale lock)"
            )
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
            self.path.unlink(missing_ok=True)
        return False


def _apply_config_file(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    try:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError("config file must hold a JSON object")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"config file sets unknown option {key!r}")
        setattr(args, dest, value)
    return args


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--ratios needs three comma-separated numbers")
    try:
        ratios = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad --ratios value: {exc}") from exc
    return ratios  # type: ignore[return-value]


def _endpoint_from_args(args: argparse.Namespace) -> EndpointConfig:
    api_key = os.environ.get(args.api_key_env or DEFAULT_API_KEY_ENV, "")
    return EndpointConfig(
        base_url=args.endpoint_url or "",
        model_id=args.model or "",
        api_key=api_key,
        timeout=args.timeout,
        max_retries=args.max_retries,
        max_parallel_requests=args.max_parallel,
    )


def _load_aliases(args: argparse.Namespace):
    if getattr(args, "alias_map", None):
        return load_alias_map(args.alias_map)
    return default_alias_map()


def _sha256_text(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_ingest(args: argparse.Namespace) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    if not in_dir.is_dir():
        raise DataError(f"input directory {in_dir} does not exist")
    aliases = _load_aliases(args)
    client = ChatCompletionClient(_endpoint_from_args(args))

    with _OutDirLock(out_dir):
        manifest_path = out_dir / "ingest_manifest.json"
        manifest = {"files": {}, "instruction_version": INSTRUCTION_VERSION}
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        files = sorted(in_dir.glob("*.txt"))
        if not files:
            raise DataError(f"no .txt files in {in_dir}")

        parsed = skipped = endpoint_failures = 0
        failures = []
        for path in files:
            try:
                text = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                failures.append({"file": path.name, "error": f"unreadable: {exc}"})
                continue
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            known = manifest["files"].get(path.name)
            out_json = out_dir / f"{path.stem}.json"
            if known and known.get("digest") == digest and known.get("status") == "ok" and out_json.exists():
                skipped += 1
                continue
            try:
                result = parse_resume(text, client, aliases=aliases)
            except (GatewayError, DataError) as exc:
                if isinstance(exc, GatewayError):
                    endpoint_failures += 1
                failures.append({"file": path.name, "error": str(exc)})
                manifest["files"][path.name] = {"digest": digest, "status": "failed"}
                continue
            out_json.write_bytes(canonical_serialize(result.record))
            (out_dir / f"{path.stem}.txt").write_text(text, encoding="utf-8")
            manifest["files"][path.name] = {
                "digest": digest,
                "status": "ok",
                "output": out_json.name,
                "repairs_applied": list(result.repairs_applied),
            }
            parsed += 1

        (out_dir / "failures.json").write_text(
            json.dumps(failures, indent=2) + "\n", encoding="utf-8"
        )
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    if endpoint_failures and parsed == 0 and skipped == 0:
        raise GatewayError(
            f"all {len(failures)} files failed; endpoint unusable (see failures.json)"
        )
    print(f"parsed {parsed}, skipped {skipped}, failed {len(failures)}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    if args.profiles:
        profiles, weights = load_profiles_dir(args.profiles)
    else:
        profiles, weights = default_profiles()
    spec = SynthBatchSpec(
        count=args.count, seed=args.seed, profiles=profiles, weights=weights
    )
    records = generate_batch(spec)

    with _OutDirLock(out_dir):
        for i, record in enumerate(records):
            stem = f"synth-{args.start_index + i:06d}"
            (out_dir / f"{stem}.json").write_bytes(canonical_serialize(record))
            (out_dir / f"{stem}.txt").write_text(
                render_resume_text(record), encoding="utf-8"
            )
        manifest = {
            "seed": args.seed,
            "count": args.count,
            "start_index": args.start_index,
            "profiles": [p.department for p in profiles],
            "weights": list(weights),
            "version": __version__,
        }
        (out_dir / "synth_manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
    print(f"generated {len(records)} records into {out_dir}")
    return EXIT_OK


def _load_documents(directory: str) -> list[SourceDocument]:
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"record directory {root} does not exist")
    documents = []
    for json_path in sorted(root.glob("*.json")):
        if json_path.name.endswith("_manifest.json") or json_path.name in (
            "failures.json",
            "manifest.json",
            "ingest_manifest.json",
        ):
            continue
        text_path = json_path.with_suffix(".txt")
        if not text_path.exists():
            raise DataError(f"{json_path} has no matching .txt raw text")
        documents.append(
            SourceDocument(
                source_id=json_path.stem,
                record=parse_record(json_path.read_bytes()),
                raw_text=text_path.read_text(encoding="utf-8"),
            )
        )
    return documents


def cmd_build(args: argparse.Namespace) -> int:
    ratios = _parse_ratios(args.ratios) if isinstance(args.ratios, str) else tuple(args.ratios)
    aliases = _load_aliases(args)
    real = [d for src in args.real for d in _load_documents(src)]
    synthetic = [d for src in args.synthetic for d in _load_documents(src)]
    if not real and not synthetic:
        raise DataError("no input records; pass --real and/or --synthetic directories")

    bundle = merge(real, synthetic)

    totals = {"dates_rewritten": 0, "skills_unified": 0, "placeholders_inserted": 0,
              "unparseable_dates": 0}
    normalized_entries = []
    for entry in bundle.entries:
        record, report = normalize_record(entry.record, aliases)
        totals["dates_rewritten"] += report.dates_rewritten
        totals["skills_unified"] += report.skills_unified
        totals["placeholders_inserted"] += report.placeholders_inserted
        totals["unparseable_dates"] += len(report.unparseable_dates)
        normalized_entries.append(replace(entry, record=record))
    bundle = replace(bundle, entries=tuple(normalized_entries))

    bundle = split(bundle, seed=args.seed, ratios=ratios, stratify=args.stratify)

    with _OutDirLock(Path(args.out)):
        manifest = export_bundle(
            bundle,
            args.out,
            seed=args.seed,
            ratios=ratios,
            base_model_id=args.base_model,
            normalization=totals,
            stratify=args.stratify,
        )
    counts = manifest["counts"]
    print(
        f"bundle of {counts['total']} records "
        f"(train {counts['train']}, val {counts['val']}, test {counts['test']}; "
        f"{manifest['dedup']['duplicates_removed']} duplicates removed)"
    )
    return EXIT_OK


def _load_model_specs(args: argparse.Namespace) -> list[dict]:
    if args.models:
        try:
            specs = json.loads(Path(args.models).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read models file {args.models}: {exc}") from exc
        if not isinstance(specs, list) or not specs:
            raise ConfigError("models file must hold a non-empty JSON array")
        return specs
    if args.endpoint_url and args.model:
        return [
            {
                "label": args.model,
                "base_url": args.endpoint_url,
                "model_id": args.model,
            }
        ]
    raise ConfigError("pass --models FILE, or --endpoint-url with --model")


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset_dir = Path(args.dataset)
    test_path = dataset_dir / "test.jsonl"
    if not test_path.exists():
        raise DataError(f"missing test split {test_path}")
    samples = load_test_split(test_path)
    if not samples:
        raise DataError(f"test split {test_path} is empty")

    dataset_manifest = dataset_dir / "manifest.json"
    dataset_digest = _sha256_text(dataset_manifest) if dataset_manifest.exists() else ""
    seed = None
    if dataset_manifest.exists():
        seed = json.loads(dataset_manifest.read_text(encoding="utf-8")).get("seed")

    aliases = _load_aliases(args)
    provider = OfflineEmbedder(dimension=args.embedding_dim)

    reports = []
    manifests = []
    with _OutDirLock(Path(args.out)):
        for spec in _load_model_specs(args):
            try:
                config = EndpointConfig(
                    base_url=spec["base_url"],
                    model_id=spec["model_id"],
                    api_key=os.environ.get(
                        spec.get("api_key_env", args.api_key_env or DEFAULT_API_KEY_ENV), ""
                    ),
                    timeout=float(spec.get("timeout", args.timeout)),
                    max_retries=int(spec.get("max_retries", args.max_retries)),
                    max_parallel_requests=int(spec.get("max_parallel_requests", args.max_parallel)),
                )
            except KeyError as exc:
                raise ConfigError(f"model spec missing {exc}") from exc
            client = ChatCompletionClient(config)
            report = evaluate_model(
                samples,
                client,
                provider,
                label=spec.get("label", config.model_id),
                group=spec.get("group", ""),
                params_label=str(spec.get("params_label", "")),
                aliases=aliases,
            )
            reports.append(report)
            manifests.append(
                build_run_manifest(
                    label=report.row.label,
                    config=config,
                    dataset_digest=dataset_digest,
                    seed=seed,
                    timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(),
                )
            )

        comparison = compare([r.row for r in reports])
        write_reports(args.out, comparison, reports, figure=not args.no_figure)
        (Path(args.out) / "run_manifest.json").write_text(
            json.dumps(manifests, indent=2) + "\n", encoding="utf-8"
        )

    sys.stdout.write((Path(args.out) / "report.txt").read_text(encoding="utf-8"))

    thresholds = {
        "em": args.min_em, "f1_sem": args.min_f1, "bleu": args.min_bleu,
        "rouge": args.min_rouge, "overall": args.min_overall,
    }
    for metric, floor in thresholds.items():
        if floor is None:
            continue
        top = max(row.percent(metric) for row in comparison.rows)
        if top < floor:
            print(f"threshold unmet: best {metric} {top:.2f} < {floor:.2f}", file=sys.stderr)
            return EXIT_DATA
    return EXIT_OK


def _add_endpoint_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint-url", help="chat-completions base URL")
    parser.add_argument("--model", help="model identifier sent to the endpoint")
    parser.add_argument(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        help=f"environment variable holding the API key (default {DEFAULT_API_KEY_ENV})",
    )
    parser.add_argument("--timeout", type=float, default=30.0)
    parser.add_argument("--max-retries", type=int, default=2)
    parser.add_argument("--max-parallel", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resumekit",
        description="Resume dataset construction, parsing, and model evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw resume .txt files through an endpoint")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of .txt resumes")
    p.add_argument("--out", required=True, help="output directory for parsed records")
    p.add_argument("--alias-map", help="skill alias map JSON (defaults to the built-in map)")
    p.add_argument("--config", help="JSON file whose values override these flags")
    _add_endpoint_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate synthetic resume records")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profiles", help="directory of profile JSON files")
    p.add_argument("--out", required=True)
    p.add_argument("--start-index", type=int, default=0)
    p.add_argument("--config", help="JSON file whose values override these flags")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="merge, normalize, split, and export a dataset")
    p.add_argument("--real", action="append", default=[], help="directory of real record pairs")
    p.add_argument(
        "--synthetic", action="append", default=[], help="directory of synthetic record pairs"
    )
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,val,test (default 0.8,0.1,0.1)")
    p.add_argument("--alias-map")
    p.add_argument("--base-model", default="meta-llama/Llama-3.1-8B-Instruct")
    p.add_argument("--stratify", action="store_true", help="split within department groups")
    p.add_argument("--config", help="JSON file whose values override these flags")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("evaluate", help="score models over an exported test split")
    p.add_argument("--dataset", required=True, help="directory produced by build")
    p.add_argument("--models", help="JSON array of model endpoint specs")
    p.add_argument("--out", required=True)
    p.add_argument("--alias-map")
    p.add_argument("--embedding-dim", type=int, default=256)
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--min-em", type=float)
    p.add_argument("--min-f1", type=float)
    p.add_argument("--min-bleu", type=float)
    p.add_argument("--min-rouge", type=float)
    p.add_argument("--min-overall", type=float)
    p.add_argument("--config", help="JSON file whose values override these flags")
    _add_endpoint_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GatewayError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT


if __name__ == "__main__":
    sys.exit(main())
