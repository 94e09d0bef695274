"""Template-based synthetic resume generation.

Records are drawn from department profiles (name, company, title, and
skill pools plus count ranges) using the SplitMix64 generator, so a
(profile, seed) pair always yields the same record, byte for byte, on
any platform. Generated records are born canonical: dates already in
canonical form, skills distinct and alias-free, name and department
populated. Running normalize_record over them is a no-op.

An optional LLM-backed path asks a chat endpoint to invent the resume
text and parses it back through the gateway; that path is for operators
with a live endpoint and is not exercised by CI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .rng import SplitMix64
from .schema import EducationEntry, ExperienceEntry, ResumeRecord

# Fixed anchor for "most recent job"; keeps output independent of the
# wall clock.
_ANCHOR_YEAR = 2024

_DEGREES = ("B.Sc.", "B.A.", "M.Sc.", "MBA", "Ph.D.")

_DESCRIPTION_TEMPLATES = (
    "Worked as {title} with a focus on {skill_a} and {skill_b}.",
    "Led {skill_a} initiatives and supported {skill_b} projects as {title}.",
    "Responsible for {skill_a} work across the team, applying {skill_b} daily.",
    "Delivered {skill_a} outcomes and mentored colleagues on {skill_b}.",
)


@dataclass(frozen=True)
class SynthProfile:
    department: str
    names: tuple[str, ...]
    companies: tuple[str, ...]
    institutions: tuple[str, ...]
    titles: tuple[str, ...]
    skills: tuple[str, ...]
    experience_count: tuple[int, int]
    skill_count: tuple[int, int]

    def __post_init__(self):
        if self.department == "":
            raise ConfigError("profile needs a department")
        for label, pool in (
            ("names", self.names),
            ("companies", self.companies),
            ("institutions", self.institutions),
            ("titles", self.titles),
            ("skills", self.skills),
        ):
            if len(pool) == 0:
                raise ConfigError(f"profile {self.department!r}: empty {label} pool")
        for label, (low, high) in (
            ("experience_count", self.experience_count),
            ("skill_count", self.skill_count),
        ):
            if not (0 <= low <= high):
                raise ConfigError(f"profile {self.department!r}: bad {label} range")
        if self.skill_count[1] > len(self.skills):
            raise ConfigError(
                f"profile {self.department!r}: skill_count exceeds pool size"
            )


@dataclass(frozen=True)
class SynthBatchSpec:
    count: int
    seed: int
    profiles: tuple[SynthProfile, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("batch count must be at least 1")
        if len(self.profiles) == 0:
            raise ConfigError("batch needs at least one profile")
        if len(self.weights) != len(self.profiles):
            raise ConfigError("one weight per profile required")
        if any(w <= 0 for w in self.weights):
            raise ConfigError("profile weights must be positive")


def load_profile(path: str | Path) -> tuple[SynthProfile, float]:
    """Read one profile JSON file; returns (profile, sampling weight)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load profile {path}: {exc}") from exc
    try:
        profile = SynthProfile(
            department=raw["department"],
            names=tuple(raw["names"]),
            companies=tuple(raw["companies"]),
            institutions=tuple(raw["institutions"]),
            titles=tuple(raw["titles"]),
            skills=tuple(raw["skills"]),
            experience_count=tuple(raw["experience_count"]),
            skill_count=tuple(raw["skill_count"]),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"profile {path} is malformed: {exc}") from exc
    weight = float(raw.get("weight", 1.0))
    return profile, weight


def load_profiles_dir(path: str | Path) -> tuple[tuple[SynthProfile, ...], tuple[float, ...]]:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise ConfigError(f"no profile files in {path}")
    loaded = [load_profile(f) for f in files]
    return tuple(p for p, _ in loaded), tuple(w for _, w in loaded)


def default_profiles() -> tuple[tuple[SynthProfile, ...], tuple[float, ...]]:
    return load_profiles_dir(Path(__file__).parent / "data" / "profiles")


def _month_str(months: int) -> str:
    return f"{months // 12:04d}-{months % 12 + 1:02d}"


def generate_resume(profile: SynthProfile, rng: SplitMix64) -> ResumeRecord:
    """One canonical record drawn from the profile's pools."""
    name = rng.choice(profile.names)
    local = ".".join(part for part in name.lower().split() if part)
    email = f"{local}{rng.randbelow(100)}@example.com"
    phone = f"+1-{rng.randint(200, 999)}-{rng.randbelow(1000):03d}-{rng.randbelow(10000):04d}"

    skills = tuple(rng.sample(profile.skills, rng.randint(*profile.skill_count)))

    # Walk backwards from the anchor so entries are most-recent first
    # and never overlap.
    entries = []
    n_jobs = rng.randint(*profile.experience_count)
    end_months = (_ANCHOR_YEAR - rng.randbelow(3)) * 12 + rng.randbelow(12)
    for j in range(n_jobs):
        duration = rng.randint(6, 48)
        start_months = end_months - duration
        end_date = _month_str(end_months)
        if j == 0 and rng.randbelow(10) < 3:
            end_date = "present"
        skill_a = rng.choice(profile.skills)
        skill_b = rng.choice(profile.skills)
        title = rng.choice(profile.titles)
        entries.append(
            ExperienceEntry(
                title=title,
                company=rng.choice(profile.companies),
                start_date=_month_str(start_months),
                end_date=end_date,
                description=rng.choice(_DESCRIPTION_TEMPLATES).format(
                    title=title, skill_a=skill_a, skill_b=skill_b
                ),
            )
        )
        end_months = start_months - rng.randint(1, 6)

    first_start_year = (end_months // 12) if n_jobs else _ANCHOR_YEAR - 4
    education = tuple(
        EducationEntry(
            degree=rng.choice(_DEGREES),
            institution=rng.choice(profile.institutions),
            end_date=f"{first_start_year - rng.randbelow(3):04d}",
        )
        for _ in range(rng.randint(1, 2))
    )

    return ResumeRecord(
        name=name,
        email=email,
        phone=phone,
        skills=skills,
        experience=tuple(entries),
        education=education,
        department=profile.department,
    )


def _pick_profile(spec: SynthBatchSpec, rng: SplitMix64) -> SynthProfile:
    total = sum(spec.weights)
    target = rng.uniform() * total
    acc = 0.0
    for profile, weight in zip(spec.profiles, spec.weights):
        acc += weight
        if target < acc:
            return profile
    return spec.profiles[-1]


def generate_batch(spec: SynthBatchSpec) -> list[ResumeRecord]:
    """Deterministic batch; record i draws from SplitMix64(seed + i).

    Seed-space partitioning keeps records independent of batch size, so
    prefixes agree across runs and batches could be produced in
    parallel without changing output.
    """
    records = []
    for i in range(spec.count):
        rng = SplitMix64(spec.seed + i)
        profile = _pick_profile(spec, rng)
        records.append(generate_resume(profile, rng))
    return records


def render_resume_text(record: ResumeRecord) -> str:
    """Plain-text rendering used as the raw_text side of synthetic pairs."""
    lines = [record.name]
    contact = []
    if record.email:
        contact.append(f"Email: {record.email}")
    if record.phone:
        contact.append(f"Phone: {record.phone}")
    if contact:
        lines.append(" | ".join(contact))
    if record.department:
        lines.append(f"Department: {record.department}")
    if record.skills:
        lines.append("")
        lines.append("SKILLS")
        lines.extend(f"- {s}" for s in record.skills)
    if record.experience:
        lines.append("")
        lines.append("EXPERIENCE")
        for e in record.experience:
            lines.append(f"{e.title}, {e.company} ({e.start_date} to {e.end_date})")
            if e.description:
                lines.append(e.description)
    if record.education:
        lines.append("")
        lines.append("EDUCATION")
        for e in record.education:
            lines.append(f"{e.degree}, {e.institution}, {e.end_date}")
    return "\n".join(lines) + "\n"


_LLM_SYNTH_PROMPT = (
    "Write a short, realistic plain-text resume for a fictional person working in "
    "the {department} department. Include a name, an email address, a phone "
    "number, a skills list, one to three dated positions, and an education line. "
    "Respond with the resume text only."
)


def generate_via_llm(department: str, client, aliases=None) -> tuple[str, ResumeRecord]:
    """Ask a chat endpoint to invent a resume, then parse it back.

    Returns (raw_text, record) so callers can persist the pair exactly
    like template output. Needs a live endpoint; failures surface as
    gateway errors with the raw payload attached.
    """
    from .llm_gateway import parse_resume

    text = client.complete(
        [{"role": "user", "content": _LLM_SYNTH_PROMPT.format(department=department)}]
    )
    result = parse_resume(text, client, aliases=aliases)
    return text, result.record
