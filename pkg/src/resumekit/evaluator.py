"""Model evaluation over a held-out test split.

Each sample's raw text goes through the gateway; the parsed record is
scored against the reference with the full metric suite. Samples whose
parse fails irrecoverably are kept, flagged, and scored all zeros, so
aggregates reflect reliability as well as accuracy. Aggregation always
runs in ascending source_id order, which makes reports independent of
arrival order and of the parallelism level.

Reported percentages are the [0, 1] means times 100, rounded to two
decimals with ROUND_HALF_UP (so 0.125 percent becomes 0.13). The
unrounded means travel alongside in the JSON for exact downstream math.
"""

from __future__ import annotations

import json
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from .dataset import load_jsonl_split
from .errors import ConfigError, GatewayError
from .llm_gateway import ChatCompletionClient, parse_resume
from .metrics import SampleScore, score_sample
from .normalize import SkillAliasMap
from .schema import ResumeRecord, parse_record

METRIC_SUITE_VERSION = "1"

_METRIC_FIELDS = ("em", "f1_sem", "bleu", "rouge", "overall")
_METRIC_HEADERS = {
    "em": "EM%",
    "f1_sem": "F1%",
    "bleu": "BLEU%",
    "rouge": "ROUGE%",
    "overall": "Overall%",
}


def round_percent(score: float) -> float:
    """score in [0, 1] -> percentage with two half-up decimals."""
    return float(Decimal(str(score * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TestSample:
    source_id: str
    raw_text: str
    reference: ResumeRecord


def load_test_split(path: str | Path) -> list[TestSample]:
    """Read an exported test JSONL; ids come from the line order."""
    samples = []
    for i, line in enumerate(load_jsonl_split(path), start=1):
        samples.append(
            TestSample(
                source_id=f"line-{i:06d}",
                raw_text=line["input"],
                reference=parse_record(line["output"]),
            )
        )
    return samples


@dataclass(frozen=True)
class SampleResult:
    source_id: str
    score: SampleScore
    failed: bool = False
    error: str = ""
    repairs_applied: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelRow:
    """One aggregate line of the comparison table."""

    label: str
    group: str = ""
    params_label: str = ""
    means: dict = field(default_factory=dict)

    def percent(self, metric: str) -> float:
        return round_percent(self.means[metric])

    def to_mapping(self) -> dict:
        return {
            "label": self.label,
            "group": self.group,
            "params_label": self.params_label,
            "means": {k: self.means[k] for k in _METRIC_FIELDS},
            "percent": {k: self.percent(k) for k in _METRIC_FIELDS},
        }

    @classmethod
    def from_mapping(cls, data: dict) -> "ModelRow":
        return cls(
            label=data["label"],
            group=data.get("group", ""),
            params_label=data.get("params_label", ""),
            means={k: float(data["means"][k]) for k in _METRIC_FIELDS},
        )

    @classmethod
    def from_percentages(
        cls, label: str, em: float, f1_sem: float, bleu: float, rouge: float,
        group: str = "", params_label: str = "",
    ) -> "ModelRow":
        """Build a row from already-rounded percentage values."""
        means = {
            "em": em / 100.0,
            "f1_sem": f1_sem / 100.0,
            "bleu": bleu / 100.0,
            "rouge": rouge / 100.0,
        }
        means["overall"] = sum(means.values()) / 4.0
        return cls(label=label, group=group, params_label=params_label, means=means)


@dataclass(frozen=True)
class AggregateReport:
    row: ModelRow
    samples: tuple[SampleResult, ...]
    failures: tuple[str, ...]

    def to_mapping(self) -> dict:
        return {
            "row": self.row.to_mapping(),
            "samples": [
                {
                    "source_id": s.source_id,
                    "scores": {k: getattr(s.score, k) for k in _METRIC_FIELDS},
                    "failed": s.failed,
                    "error": s.error,
                    "repairs_applied": list(s.repairs_applied),
                }
                for s in self.samples
            ],
            "failures": list(self.failures),
        }

    @classmethod
    def from_mapping(cls, data: dict) -> "AggregateReport":
        samples = tuple(
            SampleResult(
                source_id=s["source_id"],
                score=SampleScore(**{k: float(s["scores"][k]) for k in _METRIC_FIELDS}),
                failed=bool(s["failed"]),
                error=s.get("error", ""),
                repairs_applied=tuple(s.get("repairs_applied", ())),
            )
            for s in data["samples"]
        )
        return cls(
            row=ModelRow.from_mapping(data["row"]),
            samples=samples,
            failures=tuple(data["failures"]),
        )


def evaluate_model(
    samples: Sequence[TestSample],
    client: ChatCompletionClient,
    provider,
    *,
    label: str,
    group: str = "",
    params_label: str = "",
    aliases: SkillAliasMap | None = None,
) -> AggregateReport:
    """Score one model over the test samples.

    Parsing runs concurrently up to the client's max_parallel_requests;
    results are then accumulated single-threaded in source_id order.
    GatewayErrors become zero-scored failures; anything else propagates.
    """
    if not samples:
        raise ConfigError("cannot evaluate over an empty test split")

    def run(sample: TestSample) -> SampleResult:
        try:
            parsed = parse_resume(sample.raw_text, client, aliases=aliases)
        except GatewayError as exc:
            return SampleResult(
                source_id=sample.source_id,
                score=SampleScore.zero(),
                failed=True,
                error=str(exc),
            )
        return SampleResult(
            source_id=sample.source_id,
            score=score_sample(sample.reference, parsed.record, provider),
            repairs_applied=parsed.repairs_applied,
        )

    workers = min(client.config.max_parallel_requests, len(samples))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, samples))

    results.sort(key=lambda r: r.source_id)
    n = len(results)
    means = {
        metric: sum(getattr(r.score, metric) for r in results) / n
        for metric in _METRIC_FIELDS
    }
    return AggregateReport(
        row=ModelRow(label=label, group=group, params_label=params_label, means=means),
        samples=tuple(results),
        failures=tuple(r.source_id for r in results if r.failed),
    )


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ModelRow, ...]

    def best(self) -> dict[str, tuple[str, ...]]:
        """Labels holding the column maximum per metric; ties all flagged."""
        out = {}
        for metric in _METRIC_FIELDS:
            top = max(row.percent(metric) for row in self.rows)
            out[metric] = tuple(r.label for r in self.rows if r.percent(metric) == top)
        return out


def compare(rows: Sequence[ModelRow]) -> Comparison:
    if not rows:
        raise ConfigError("no rows to compare")
    labels = [r.label for r in rows]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate model labels in comparison")
    return Comparison(rows=tuple(rows))


def improvement(fine: ModelRow, base: ModelRow) -> dict[str, float | None]:
    """Relative percentage change per metric, two half-up decimals.

    None marks a metric whose base percentage is zero (undefined
    change), never a silent zero.
    """
    out: dict[str, float | None] = {}
    for metric in _METRIC_FIELDS:
        base_pct = base.percent(metric)
        fine_pct = fine.percent(metric)
        if base_pct == 0.0:
            out[metric] = None
        else:
            delta = 100.0 * (fine_pct - base_pct) / base_pct
            out[metric] = float(
                Decimal(str(delta)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
            )
    return out


def render_text(comparison: Comparison) -> str:
    """Fixed-width table; '*' marks each column's best value."""
    best = comparison.best()
    headers = ["group", "model", "params(B)"] + [_METRIC_HEADERS[m] for m in _METRIC_FIELDS]
    body = []
    for row in comparison.rows:
        cells = [row.group, row.label, row.params_label]
        for metric in _METRIC_FIELDS:
            mark = "*" if row.label in best[metric] else ""
            cells.append(f"{row.percent(metric):.2f}{mark}")
        body.append(cells)
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_json(comparison: Comparison) -> str:
    payload = {
        "metric_suite_version": METRIC_SUITE_VERSION,
        "rows": [r.to_mapping() for r in comparison.rows],
        "best": {k: list(v) for k, v in comparison.best().items()},
    }
    return json.dumps(payload, indent=2) + "\n"


def parse_comparison_json(text: str) -> Comparison:
    data = json.loads(text)
    return Comparison(rows=tuple(ModelRow.from_mapping(r) for r in data["rows"]))


def render_csv(comparison: Comparison) -> str:
    import csv
    import io

    best = comparison.best()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["group", "model", "params_label"]
        + [m for m in _METRIC_FIELDS]
        + [f"best_{m}" for m in _METRIC_FIELDS]
    )
    for row in comparison.rows:
        writer.writerow(
            [row.group, row.label, row.params_label]
            + [f"{row.percent(m):.2f}" for m in _METRIC_FIELDS]
            + [str(row.label in best[m]).lower() for m in _METRIC_FIELDS]
        )
    return buf.getvalue()


def render_figure(comparison: Comparison, path: str | Path) -> None:
    """Grouped bar chart of the comparison, one bar cluster per metric."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = list(_METRIC_FIELDS)
    rows = comparison.rows
    width = 0.8 / len(rows)
    fig, ax = plt.subplots(figsize=(1.8 * len(metrics) + 2, 4.5))
    for i, row in enumerate(rows):
        xs = [j + i * width for j in range(len(metrics))]
        label = row.label if not row.group else f"{row.label} ({row.group})"
        ax.bar(xs, [row.percent(m) for m in metrics], width=width, label=label)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(metrics))])
    ax.set_xticklabels([_METRIC_HEADERS[m] for m in metrics])
    ax.set_ylabel("score (%)")
    ax.set_ylim(0, 105)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def endpoint_digest(config) -> str:
    """Stable digest of an endpoint config, excluding the secret."""
    payload = json.dumps(
        {
            "base_url": config.base_url,
            "model_id": config.model_id,
            "timeout": config.timeout,
            "max_retries": config.max_retries,
            "max_parallel_requests": config.max_parallel_requests,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_run_manifest(
    *,
    label: str,
    config,
    dataset_digest: str,
    seed: int | None,
    timestamp: str,
) -> dict:
    return {
        "model_label": label,
        "endpoint_digest": endpoint_digest(config),
        "dataset_digest": dataset_digest,
        "seed": seed,
        "timestamp": timestamp,
        "metric_suite_version": METRIC_SUITE_VERSION,
    }


def _label_filename(label: str) -> str:
    # Labels may hold slashes (model ids); keep filenames flat.
    return "".join(c if c.isalnum() or c in "._ -" else "_" for c in label)


def write_reports(
    out_dir: str | Path,
    comparison: Comparison,
    reports: Sequence[AggregateReport] = (),
    figure: bool = True,
) -> None:
    """Write report.txt/.json/.csv, per-model detail, and the figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_text(comparison), encoding="utf-8")
    (out / "report.json").write_text(render_json(comparison), encoding="utf-8")
    (out / "report.csv").write_text(render_csv(comparison), encoding="utf-8")
    if reports:
        models = out / "models"
        models.mkdir(exist_ok=True)
        for report in reports:
            (models / f"{_label_filename(report.row.label)}.json").write_text(
                json.dumps(report.to_mapping(), indent=2) + "\n", encoding="utf-8"
            )
    if figure:
        render_figure(comparison, out / "report.png")
