"""Dataset assembly: merge, split, and fine-tuning artifact export.

A DatasetBundle pairs each canonical record with the raw text it was
parsed or rendered from, tagged real or synthetic. Merging deduplicates
on the canonical bytes of the structured record (not the raw text) and
refuses source_id collisions that carry different content. Splitting is
seeded and exact: with ratios (t, v, s), the validation split gets
floor(v * N) records and the test split floor(s * N); the remainder
trains.

Exported training lines are UTF-8 JSON objects, one per line with LF
endings, shaped {"instruction", "input", "output"} where instruction is
the fixed versioned parsing instruction and output is the canonical
serialization of the record.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, DataError
from .prompts import INSTRUCTION_VERSION, PARSING_INSTRUCTION
from .rng import SplitMix64
from .schema import ResumeRecord, canonical_serialize

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)

REAL = "real"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class SourceDocument:
    """One (raw text, parsed record) pair entering the pipeline."""

    source_id: str
    record: ResumeRecord
    raw_text: str


@dataclass(frozen=True)
class BundleEntry:
    source_id: str
    record: ResumeRecord
    raw_text: str
    provenance: str


@dataclass(frozen=True)
class DatasetBundle:
    entries: tuple[BundleEntry, ...]
    duplicates_removed: int = 0
    split_assignment: dict[str, str] = field(default_factory=dict)

    def split_entries(self, split_name: str) -> list[BundleEntry]:
        return [e for e in self.entries if self.split_assignment.get(e.source_id) == split_name]

    def counts(self) -> dict[str, int]:
        out = {"total": len(self.entries)}
        for name in SPLIT_NAMES:
            out[name] = sum(1 for e in self.entries if self.split_assignment.get(e.source_id) == name)
        out[REAL] = sum(1 for e in self.entries if e.provenance == REAL)
        out[SYNTHETIC] = sum(1 for e in self.entries if e.provenance == SYNTHETIC)
        return out


def merge(
    real: Sequence[SourceDocument], synthetic: Sequence[SourceDocument]
) -> DatasetBundle:
    """Combine real and synthetic documents into one deduplicated bundle.

    Records with identical canonical bytes collapse to the first
    occurrence (real documents are consumed first) and the drop count is
    recorded. A source_id reused for different content is an error, not a
    dedup.
    """
    entries: list[BundleEntry] = []
    by_id: dict[str, bytes] = {}
    seen_bytes: set[bytes] = set()
    duplicates = 0
    for provenance, documents in ((REAL, real), (SYNTHETIC, synthetic)):
        for doc in documents:
            if doc.raw_text == "":
                raise DataError(f"{doc.source_id}: empty raw_text")
            blob = canonical_serialize(doc.record)
            known = by_id.get(doc.source_id)
            if known is not None:
                if known != blob:
                    raise DataError(
                        f"source_id collision with different content: {doc.source_id}"
                    )
                duplicates += 1
                continue
            if blob in seen_bytes:
                duplicates += 1
                continue
            by_id[doc.source_id] = blob
            seen_bytes.add(blob)
            entries.append(
                BundleEntry(
                    source_id=doc.source_id,
                    record=doc.record,
                    raw_text=doc.raw_text,
                    provenance=provenance,
                )
            )
    return DatasetBundle(entries=tuple(entries), duplicates_removed=duplicates)


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise ConfigError("ratios must be (train, val, test)")
    if any(r < 0 for r in ratios):
        raise ConfigError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    return tuple(ratios)  # type: ignore[return-value]


def _floor_size(ratio: float, n: int) -> int:
    # The epsilon guards against products like 0.1 * 30 landing a hair
    # under the exact integer.
    return int(ratio * n + 1e-9)


def split(
    bundle: DatasetBundle,
    seed: int,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    stratify: bool = False,
) -> DatasetBundle:
    """Assign every entry to train/val/test, deterministically by seed.

    Entries are ordered by source_id, shuffled with SplitMix64(seed),
    then sliced: the first floor(val_ratio * N) go to val, the next
    floor(test_ratio * N) to test, the remainder to train. With
    stratify=True the same rule applies within each department group, so
    overall sizes may differ from the global floors.
    """
    _, val_ratio, test_ratio = _check_ratios(ratios)
    assignment: dict[str, str] = {}

    def assign(group: list[str], rng: SplitMix64) -> None:
        ids = sorted(group)
        rng.shuffle(ids)
        n = len(ids)
        n_val = _floor_size(val_ratio, n)
        n_test = _floor_size(test_ratio, n)
        for sid in ids[:n_val]:
            assignment[sid] = "val"
        for sid in ids[n_val : n_val + n_test]:
            assignment[sid] = "test"
        for sid in ids[n_val + n_test :]:
            assignment[sid] = "train"

    if stratify:
        groups: dict[str, list[str]] = {}
        for e in bundle.entries:
            groups.setdefault(e.record.department, []).append(e.source_id)
        for i, dept in enumerate(sorted(groups)):
            assign(groups[dept], SplitMix64(seed + i))
    else:
        assign([e.source_id for e in bundle.entries], SplitMix64(seed))

    return replace(bundle, split_assignment=assignment)


def export_instruction_jsonl(bundle: DatasetBundle, split_name: str, path: str | Path) -> int:
    """Write one split as instruction-tuning JSONL; returns line count."""
    if split_name not in SPLIT_NAMES:
        raise ConfigError(f"unknown split {split_name!r}")
    if bundle.entries and not bundle.split_assignment:
        raise DataError("bundle has no split assignment; run split() first")
    entries = bundle.split_entries(split_name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            line = json.dumps(
                {
                    "instruction": PARSING_INSTRUCTION,
                    "input": entry.raw_text,
                    "output": canonical_serialize(entry.record).decode("utf-8"),
                },
                ensure_ascii=False,
            )
            fh.write(line + "\n")
    return len(entries)


@dataclass(frozen=True)
class LoraTrainingConfig:
    base_model_id: str
    lora_r: int = 16
    lora_alpha: int = 16
    target_modules: tuple[str, ...] = ("q_proj", "k_proj", "v_proj", "o_proj")
    batch_size: int = 8
    learning_rate: float = 5e-5
    max_steps: int = 200
    warmup_steps: int = 5

    def __post_init__(self):
        if self.lora_r < 1 or self.lora_alpha < 1:
            raise ConfigError("lora_r and lora_alpha must be positive")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ConfigError("batch_size and max_steps must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.warmup_steps < 0 or self.warmup_steps > self.max_steps:
            raise ConfigError("warmup_steps must lie in [0, max_steps]")

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


def emit_lora_config(base_model_id: str, path: str | Path) -> LoraTrainingConfig:
    config = LoraTrainingConfig(base_model_id=base_model_id)
    Path(path).write_text(
        json.dumps(config.to_mapping(), indent=2) + "\n", encoding="utf-8"
    )
    return config


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def export_bundle(
    bundle: DatasetBundle,
    out_dir: str | Path,
    *,
    seed: int,
    ratios: Sequence[float],
    base_model_id: str,
    normalization: dict | None = None,
    stratify: bool = False,
) -> dict:
    """Write all three splits, the LoRA config, and the bundle manifest.

    The manifest records everything needed to reproduce the export:
    seed, ratios, counts, dedup stats, and a sha256 digest per emitted
    file. Returns the manifest mapping.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = bundle.counts()
    digests = {}
    for name in SPLIT_NAMES:
        filename = f"{name}.jsonl"
        export_instruction_jsonl(bundle, name, out / filename)
        digests[filename] = file_digest(out / filename)
    emit_lora_config(base_model_id, out / "lora_config.json")
    digests["lora_config.json"] = file_digest(out / "lora_config.json")
    manifest = {
        "seed": seed,
        "ratios": list(ratios),
        "stratify": stratify,
        "counts": counts,
        "dedup": {"duplicates_removed": bundle.duplicates_removed},
        "normalization": normalization or {},
        "instruction_version": INSTRUCTION_VERSION,
        "digests": digests,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def load_jsonl_split(path: str | Path) -> list[dict]:
    """Read an exported split back; each line must carry the three keys."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("instruction", "input", "output"):
                if key not in obj or not isinstance(obj[key], str):
                    raise DataError(f"{path}:{lineno}: missing or non-string {key!r}")
            lines.append(obj)
    return lines
