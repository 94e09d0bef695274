"""Canonical resume record schema.

Every parsed or generated resume is a ResumeRecord with exactly seven
top-level keys, serialized in a fixed order:

    name, email, phone, skills, experience, education, department

Absent scalar values are empty strings and absent collections are empty
lists; keys are never omitted. ``canonical_serialize`` is the single
source of truth for on-disk bytes: UTF-8 JSON with no insignificant
whitespace and the key order above, so equal records always produce
identical bytes.

A machine-readable JSON Schema for the same contract ships in
``data/resume_record.schema.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import DataError

FIELD_ORDER = ("name", "email", "phone", "skills", "experience", "education", "department")
EXPERIENCE_FIELDS = ("title", "company", "start_date", "end_date", "description")
EDUCATION_FIELDS = ("degree", "institution", "end_date")

_LIST_FIELDS = {"skills", "experience", "education"}
_SCALAR_FIELDS = tuple(k for k in FIELD_ORDER if k not in _LIST_FIELDS)


@dataclass(frozen=True)
class ExperienceEntry:
    title: str = ""
    company: str = ""
    start_date: str = ""
    end_date: str = ""
    description: str = ""


@dataclass(frozen=True)
class EducationEntry:
    degree: str = ""
    institution: str = ""
    end_date: str = ""


@dataclass(frozen=True)
class ResumeRecord:
    name: str = ""
    email: str = ""
    phone: str = ""
    skills: tuple[str, ...] = ()
    experience: tuple[ExperienceEntry, ...] = ()
    education: tuple[EducationEntry, ...] = ()
    department: str = ""


@dataclass(frozen=True)
class Violation:
    """One schema rule broken at one path, e.g. ('skills[2]', 'empty_skill')."""

    path: str
    rule: str
    message: str = ""


class SchemaError(DataError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        detail = "; ".join(f"{v.path}: {v.rule}" for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"record violates schema: {detail}{more}")


@dataclass(frozen=True)
class FlatView:
    """Depth-first (path, value) leaf pairs of one record.

    Paths use dotted keys with bracketed list indices, for example
    ``experience[0].title``. List elements appear in index order and
    empty lists contribute no pairs, so the pairs are exactly the
    scalar leaves of the record.
    """

    pairs: tuple[tuple[str, str], ...]

    def paths(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.pairs)

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    def render(self) -> str:
        """Whole-document text: one 'path: value' line per leaf."""
        return "\n".join(f"{p}: {v}" for p, v in self.pairs)


# Canonical date shape used by the date-order check. Dates that do not
# match (including preserved unparseable originals) are simply skipped.
def _is_canonical_date(value: str) -> bool:
    if len(value) == 4:
        return value.isdigit()
    if len(value) == 7:
        return value[:4].isdigit() and value[4] == "-" and value[5:].isdigit()
    return False


def _check_str(violations: list[Violation], path: str, value: Any) -> bool:
    if isinstance(value, str):
        return True
    violations.append(Violation(path, "wrong_type", f"expected string, got {type(value).__name__}"))
    return False


def _validate_mapping(data: Mapping[str, Any]) -> list[Violation]:
    violations: list[Violation] = []
    for key in FIELD_ORDER:
        if key not in data:
            violations.append(Violation(key, "missing_key"))
    for key in data:
        if key not in FIELD_ORDER:
            violations.append(Violation(str(key), "unexpected_key"))
    if violations:
        return violations

    for key in _SCALAR_FIELDS:
        _check_str(violations, key, data[key])
    if isinstance(data["skills"], list):
        for i, s in enumerate(data["skills"]):
            _check_str(violations, f"skills[{i}]", s)
    else:
        violations.append(Violation("skills", "wrong_type", "expected list"))

    for key, fields in (("experience", EXPERIENCE_FIELDS), ("education", EDUCATION_FIELDS)):
        entries = data[key]
        if not isinstance(entries, list):
            violations.append(Violation(key, "wrong_type", "expected list"))
            continue
        for i, entry in enumerate(entries):
            prefix = f"{key}[{i}]"
            if not isinstance(entry, Mapping):
                violations.append(Violation(prefix, "wrong_type", "expected object"))
                continue
            for f in fields:
                if f not in entry:
                    violations.append(Violation(f"{prefix}.{f}", "missing_key"))
                else:
                    _check_str(violations, f"{prefix}.{f}", entry[f])
            for f in entry:
                if f not in fields:
                    violations.append(Violation(f"{prefix}.{f}", "unexpected_key"))
    return violations


def _validate_record(record: ResumeRecord) -> list[Violation]:
    violations: list[Violation] = []
    seen: set[str] = set()
    for i, skill in enumerate(record.skills):
        if skill == "":
            violations.append(Violation(f"skills[{i}]", "empty_skill"))
        elif skill in seen:
            violations.append(Violation(f"skills[{i}]", "duplicate_skill", skill))
        seen.add(skill)
    for i, entry in enumerate(record.experience):
        start, end = entry.start_date, entry.end_date
        if _is_canonical_date(start) and _is_canonical_date(end) and start > end:
            violations.append(
                Violation(f"experience[{i}]", "date_order", f"{start} > {end}")
            )
    for i, entry in enumerate(record.education):
        if entry.degree == "":
            violations.append(Violation(f"education[{i}].degree", "empty_required"))
        if entry.institution == "":
            violations.append(Violation(f"education[{i}].institution", "empty_required"))
    return violations


def validate(record: ResumeRecord | Mapping[str, Any]) -> list[Violation]:
    """Check one record against the schema rules.

    Accepts either a constructed ResumeRecord or a raw mapping fresh
    from ``json.loads``. Violations come back as values rather than
    exceptions so callers can report all of them at once; an empty list
    means the record is valid.
    """
    if isinstance(record, ResumeRecord):
        return _validate_record(record)
    structural = _validate_mapping(record)
    if structural:
        return structural
    return _validate_record(_record_from_validated(record))


def _record_from_validated(data: Mapping[str, Any]) -> ResumeRecord:
    return ResumeRecord(
        name=data["name"],
        email=data["email"],
        phone=data["phone"],
        skills=tuple(data["skills"]),
        experience=tuple(
            ExperienceEntry(**{f: e[f] for f in EXPERIENCE_FIELDS}) for e in data["experience"]
        ),
        education=tuple(
            EducationEntry(**{f: e[f] for f in EDUCATION_FIELDS}) for e in data["education"]
        ),
        department=data["department"],
    )


def record_to_mapping(record: ResumeRecord) -> dict[str, Any]:
    """Plain dict in canonical key order, ready for json.dumps."""
    return {
        "name": record.name,
        "email": record.email,
        "phone": record.phone,
        "skills": list(record.skills),
        "experience": [
            {f: getattr(e, f) for f in EXPERIENCE_FIELDS} for e in record.experience
        ],
        "education": [
            {f: getattr(e, f) for f in EDUCATION_FIELDS} for e in record.education
        ],
        "department": record.department,
    }


def canonical_serialize(record: ResumeRecord) -> bytes:
    """Serialize to canonical UTF-8 bytes; equal records give equal bytes."""
    violations = validate(record)
    if violations:
        raise SchemaError(violations)
    text = json.dumps(record_to_mapping(record), ensure_ascii=False, separators=(",", ":"))
    return text.encode("utf-8")


def parse_record(data: str | bytes) -> ResumeRecord:
    """Parse JSON text into a validated ResumeRecord.

    Raises SchemaError carrying every violation found; the round trip
    canonical_serialize(parse_record(canonical_serialize(r))) is
    byte-stable.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError([Violation("", "invalid_json", str(exc))]) from exc
    if not isinstance(raw, Mapping):
        raise SchemaError([Violation("", "wrong_type", "top level must be an object")])
    violations = validate(raw)
    if violations:
        raise SchemaError(violations)
    return _record_from_validated(raw)


def flatten(record: ResumeRecord) -> FlatView:
    """Flatten a valid record into its deterministic FlatView.

    Key order follows FIELD_ORDER, list indices ascend, and every
    scalar leaf appears exactly once.
    """
    violations = validate(record)
    if violations:
        raise SchemaError(violations)
    pairs: list[tuple[str, str]] = []
    for key in FIELD_ORDER:
        if key == "skills":
            for i, skill in enumerate(record.skills):
                pairs.append((f"skills[{i}]", skill))
        elif key == "experience":
            for i, entry in enumerate(record.experience):
                for f in EXPERIENCE_FIELDS:
                    pairs.append((f"experience[{i}].{f}", getattr(entry, f)))
        elif key == "education":
            for i, entry in enumerate(record.education):
                for f in EDUCATION_FIELDS:
                    pairs.append((f"education[{i}].{f}", getattr(entry, f)))
        else:
            pairs.append((key, getattr(record, key)))
    return FlatView(pairs=tuple(pairs))
