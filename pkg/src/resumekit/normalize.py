"""Record normalization: dates, skill aliases, required placeholders.

The date grammar accepted by ``normalize_date`` is closed and documented
in the README. Anything outside it is reported as unparseable and the
original string is preserved verbatim; no guessing. ``normalize_record``
is idempotent: running it twice yields the same record and a second
report with zero rewrites.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .schema import ResumeRecord, validate

NAME_PLACEHOLDER = "John Doe"
DEPARTMENT_PLACEHOLDER = "Unknown"

_PRESENT_TOKENS = {"present", "current", "now"}

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11,
    "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}

_YEAR_ONLY = re.compile(r"^(\d{4})$")
_MONTH_SLASH_YEAR = re.compile(r"^(\d{1,2})/(\d{4})$")
_YEAR_DASH_MONTH = re.compile(r"^(\d{4})-(\d{1,2})$")
_NAME_YEAR = re.compile(r"^([A-Za-z]+)\.?\s+(\d{4})$")


def _valid_year(y: int) -> bool:
    return 1900 <= y <= 2099


def normalize_date(raw: str) -> str | None:
    """Map one date string to its canonical form.

    Returns 'YYYY-MM', 'YYYY', or 'present'; returns None when the input
    is outside the grammar, in which case callers keep the original.
    """
    text = raw.strip()
    if text.lower() in _PRESENT_TOKENS:
        return "present"
    m = _YEAR_ONLY.match(text)
    if m:
        year = int(m.group(1))
        return text if _valid_year(year) else None
    m = _MONTH_SLASH_YEAR.match(text)
    if m:
        month, year = int(m.group(1)), int(m.group(2))
        if 1 <= month <= 12 and _valid_year(year):
            return f"{year:04d}-{month:02d}"
        return None
    m = _YEAR_DASH_MONTH.match(text)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
        if 1 <= month <= 12 and _valid_year(year):
            return f"{year:04d}-{month:02d}"
        return None
    m = _NAME_YEAR.match(text)
    if m:
        month = _MONTHS.get(m.group(1).lower())
        year = int(m.group(2))
        if month is not None and _valid_year(year):
            return f"{year:04d}-{month:02d}"
        return None
    return None


@dataclass(frozen=True)
class SkillAliasMap:
    """Alias surface -> canonical skill name, keys case-folded.

    The constructor rejects chains: a canonical value may not itself be
    an alias key that maps somewhere else, which makes application
    idempotent by construction.
    """

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for alias, canonical in self.entries.items():
            if alias != alias.casefold():
                raise ConfigError(f"alias key not case-folded: {alias!r}")
            if not isinstance(canonical, str) or canonical == "":
                raise ConfigError(f"alias {alias!r} maps to a non-string or empty value")
            target = self.entries.get(canonical.casefold())
            if target is not None and target != canonical:
                raise ConfigError(
                    f"alias chain: {alias!r} -> {canonical!r} -> {target!r}"
                )

    def resolve(self, surface: str) -> str:
        return self.entries.get(surface.casefold(), surface)


def load_alias_map(path: str | Path) -> SkillAliasMap:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load alias map {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"alias map {path} must be a JSON object")
    return SkillAliasMap(entries={str(k).casefold(): v for k, v in raw.items()})


def default_alias_map() -> SkillAliasMap:
    return load_alias_map(Path(__file__).parent / "data" / "skill_aliases.json")


def unify_skills(skills: tuple[str, ...] | list[str], aliases: SkillAliasMap) -> tuple[str, ...]:
    """Trim, resolve aliases, and drop empties and exact duplicates.

    First occurrence wins, so output order follows input order. Output
    length never exceeds input length.
    """
    out: list[str] = []
    seen: set[str] = set()
    for raw in skills:
        surface = aliases.resolve(raw.strip())
        if surface == "" or surface in seen:
            continue
        seen.add(surface)
        out.append(surface)
    return tuple(out)


@dataclass(frozen=True)
class NormalizationReport:
    dates_rewritten: int = 0
    skills_unified: int = 0
    placeholders_inserted: int = 0
    unparseable_dates: tuple[tuple[str, str], ...] = ()

    def rewrite_total(self) -> int:
        return self.dates_rewritten + self.skills_unified + self.placeholders_inserted


def fill_missing(record: ResumeRecord) -> tuple[ResumeRecord, int]:
    """Insert placeholders for empty name and department; count insertions."""
    inserted = 0
    name, department = record.name, record.department
    if name == "":
        name, inserted = NAME_PLACEHOLDER, inserted + 1
    if department == "":
        department, inserted = DEPARTMENT_PLACEHOLDER, inserted + 1
    if inserted:
        record = replace(record, name=name, department=department)
    return record, inserted


def _normalize_date_field(
    raw: str, path: str, *, allow_present: bool, report: dict
) -> str:
    if raw.strip() == "":
        return raw
    canonical = normalize_date(raw)
    if canonical is None or (canonical == "present" and not allow_present):
        report["unparseable"].append((path, raw))
        return raw
    if canonical != raw:
        report["dates_rewritten"] += 1
    return canonical


def normalize_record(
    record: ResumeRecord, aliases: SkillAliasMap | None = None
) -> tuple[ResumeRecord, NormalizationReport]:
    """Bring one record into normal form and report what changed.

    Dates are canonicalized per the grammar; 'present' is legal only as
    an experience end date, so elsewhere present-tokens count as
    unparseable and the original survives. Skills go through
    unify_skills, then placeholders fill empty name and department.
    Counters reflect actual rewrites, which is what makes the
    idempotence check (second run reports all zeros) meaningful.
    """
    if aliases is None:
        aliases = default_alias_map()
    acc = {"dates_rewritten": 0, "unparseable": []}

    experience = tuple(
        replace(
            entry,
            start_date=_normalize_date_field(
                entry.start_date, f"experience[{i}].start_date", allow_present=False, report=acc
            ),
            end_date=_normalize_date_field(
                entry.end_date, f"experience[{i}].end_date", allow_present=True, report=acc
            ),
        )
        for i, entry in enumerate(record.experience)
    )
    education = tuple(
        replace(
            entry,
            end_date=_normalize_date_field(
                entry.end_date, f"education[{i}].end_date", allow_present=False, report=acc
            ),
        )
        for i, entry in enumerate(record.education)
    )

    skills = unify_skills(record.skills, aliases)
    dropped = len(record.skills) - len(skills)
    changed = sum(
        1 for old, new in zip(_surviving_inputs(record.skills, aliases), skills) if old != new
    )
    skills_unified = dropped + changed

    normalized = replace(record, skills=skills, experience=experience, education=education)
    normalized, placeholders = fill_missing(normalized)

    report = NormalizationReport(
        dates_rewritten=acc["dates_rewritten"],
        skills_unified=skills_unified,
        placeholders_inserted=placeholders,
        unparseable_dates=tuple(acc["unparseable"]),
    )
    return normalized, report


def _surviving_inputs(skills: tuple[str, ...], aliases: SkillAliasMap) -> list[str]:
    # Original surfaces of the entries that survive unification, aligned
    # with unify_skills output so changed entries can be counted.
    out: list[str] = []
    seen: set[str] = set()
    for raw in skills:
        surface = aliases.resolve(raw.strip())
        if surface == "" or surface in seen:
            continue
        seen.add(surface)
        out.append(raw)
    return out


def assert_normalized_valid(record: ResumeRecord) -> None:
    """Sanity helper for callers that need the post-condition explicit."""
    violations = validate(record)
    if violations:
        from .schema import SchemaError

        raise SchemaError(violations)
