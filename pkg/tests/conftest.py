"""Shared fixtures: record factories, fake transports, a local chat server.

The date and stemmer tables here are frozen expected values; tests
compare production output against them rather than recomputing.
"""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from resumekit.schema import (
    EducationEntry,
    ExperienceEntry,
    ResumeRecord,
    canonical_serialize,
)

# (input, expected) for normalize_date with allow_present=True.
# None means unparseable: the original is preserved and reported.
DATE_CASES = [
    ("January 2020", "2020-01"),
    ("Jan 2020", "2020-01"),
    ("jan. 2021", "2021-01"),
    ("Sept 2019", "2019-09"),
    ("sept. 2019", "2019-09"),
    ("September 1999", "1999-09"),
    ("DECEMBER 2005", "2005-12"),
    ("03/2019", "2019-03"),
    ("3/2019", "2019-03"),
    ("12/2004", "2004-12"),
    ("2020-5", "2020-05"),
    ("2019-03", "2019-03"),
    ("1999", "1999"),
    ("2099", "2099"),
    ("1900", "1900"),
    ("present", "present"),
    ("Present", "present"),
    ("CURRENT", "present"),
    ("now", "present"),
    (" May 2018 ", "2018-05"),
    ("May 2018", "2018-05"),
    ("13/2019", None),
    ("0/2019", None),
    ("2019-13", None),
    ("2019-0", None),
    ("1899", None),
    ("2100", None),
    ("sometime ago", None),
    ("Febuary 2020", None),
    ("20200", None),
    ("", None),
]

# Porter (1980) behavior, verified against the published algorithm.
PORTER_CASES = [
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
    ("feed", "feed"),
    ("agreed", "agre"),
    ("plastered", "plaster"),
    ("bled", "bled"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflat"),
    ("troubled", "troubl"),
    ("sized", "size"),
    ("hopping", "hop"),
    ("tanned", "tan"),
    ("falling", "fall"),
    ("hissing", "hiss"),
    ("fizzed", "fizz"),
    ("failing", "fail"),
    ("filing", "file"),
    ("happy", "happi"),
    ("sky", "sky"),
    ("relational", "relat"),
    ("conditional", "condit"),
    ("rational", "ration"),
    ("valenci", "valenc"),
    ("hesitanci", "hesit"),
    ("digitizer", "digit"),
    ("conformabli", "conform"),
    ("radicalli", "radic"),
    ("differentli", "differ"),
    ("vileli", "vile"),
    ("analogousli", "analog"),
    ("vietnamization", "vietnam"),
    ("predication", "predic"),
    ("operator", "oper"),
    ("feudalism", "feudal"),
    ("decisiveness", "decis"),
    ("hopefulness", "hope"),
    ("callousness", "callous"),
    ("formaliti", "formal"),
    ("sensitiviti", "sensit"),
    ("sensibiliti", "sensibl"),
    ("triplicate", "triplic"),
    ("formative", "form"),
    ("formalize", "formal"),
    ("electriciti", "electr"),
    ("electrical", "electr"),
    ("hopeful", "hope"),
    ("goodness", "good"),
    ("revival", "reviv"),
    ("allowance", "allow"),
    ("inference", "infer"),
    ("airliner", "airlin"),
    ("gyroscopic", "gyroscop"),
    ("adjustable", "adjust"),
    ("defensible", "defens"),
    ("irritant", "irrit"),
    ("replacement", "replac"),
    ("adjustment", "adjust"),
    ("dependent", "depend"),
    ("adoption", "adopt"),
    ("homologou", "homolog"),
    ("communism", "commun"),
    ("activate", "activ"),
    ("angulariti", "angular"),
    ("effective", "effect"),
    ("bowdlerize", "bowdler"),
    ("probate", "probat"),
    ("rate", "rate"),
    ("cease", "ceas"),
    ("controll", "control"),
    ("roll", "roll"),
]


def make_record(**overrides) -> ResumeRecord:
    """A small fully-populated valid record; fields replaceable by kwarg."""
    base = dict(
        name="Jane Smith",
        email="jane.smith@example.com",
        phone="+1-555-010-0100",
        skills=("Python", "SQL"),
        experience=(
            ExperienceEntry(
                title="Data Analyst",
                company="Acme Corp",
                start_date="2019-03",
                end_date="2021-06",
                description="Built reporting dashboards for the sales team.",
            ),
        ),
        education=(
            EducationEntry(
                degree="B.S. in Statistics",
                institution="State University",
                end_date="2018",
            ),
        ),
        department="Information Technology",
    )
    base.update(overrides)
    return ResumeRecord(**base)


def record_json(record: ResumeRecord) -> str:
    return canonical_serialize(record).decode("utf-8")


def messy_record(rng: random.Random, strict: bool) -> ResumeRecord:
    """Randomized pre-normalization record.

    strict=True keeps required education fields populated and date pools
    ordered so the normalized output must pass schema validation.
    """
    starts = ["2015-01", "Jan 2016", "3/2017", "2016", "  March 2015 ", "not a date", ""]
    ends = ["2020-12", "December 2021", "present", "NOW", "21/2019", "", "mystery"]
    edu_ends = ["2019", "May 2019", "2018-6", "", "TBD", "present"]
    skills_pool = ["py", "Python", " SQL ", "js", "JS", "", "react", "Go", "k8s", "HR", "  ", "ml"]
    experience = tuple(
        ExperienceEntry(
            title=rng.choice(["Engineer", "", "Analyst"]),
            company=rng.choice(["Acme", "Globex", ""]),
            start_date=rng.choice(starts),
            end_date=rng.choice(ends),
            description=rng.choice(["Did work.", ""]),
        )
        for _ in range(rng.randint(0, 3))
    )
    education = tuple(
        EducationEntry(
            degree="B.S." if strict else rng.choice(["B.S.", ""]),
            institution="State U" if strict else rng.choice(["State U", ""]),
            end_date=rng.choice(edu_ends),
        )
        for _ in range(rng.randint(0, 2))
    )
    return ResumeRecord(
        name=rng.choice(["", "Ann Lee", " Bob Ray ", "Zoë"]),
        email=rng.choice(["a@b.example", ""]),
        phone=rng.choice(["+1-555-000-1111", ""]),
        skills=tuple(rng.choice(skills_pool) for _ in range(rng.randint(0, 6))),
        experience=experience,
        education=education,
        department=rng.choice(["", "Information Technology", "HR dept"]),
    )


def chat_response(content: str) -> dict:
    """Wire-shaped chat completion body with the given message content."""
    return {"choices": [{"message": {"content": content}}]}


def echo_transport(config, path, payload):
    """Fake transport returning the user message verbatim as the reply.

    With references serialized as the user message this makes any model
    a perfect parser, which pins every metric at 1.0.
    """
    assert path == "/chat/completions"
    return chat_response(payload["messages"][-1]["content"])


class ScriptedTransport:
    """Replays a fixed sequence of responses or exceptions, recording calls."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def __call__(self, config, path, payload):
        self.calls.append((path, payload))
        action = self.script.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


class _ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        status, body = self.server.respond(self.path, payload, dict(self.headers))
        data = body if isinstance(body, (bytes, bytearray)) else json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@contextmanager
def serve_chat(respond):
    """Run a local HTTP server; respond(path, payload, headers) -> (status, body).

    body may be a dict (JSON-encoded) or raw bytes. Yields the base URL.
    """
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
    server.respond = respond
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        thread.join()
        server.server_close()


def echo_responder(path, payload, headers):
    """serve_chat responder mirroring echo_transport over real HTTP."""
    return 200, chat_response(payload["messages"][-1]["content"])


@pytest.fixture
def sample_record() -> ResumeRecord:
    return make_record()
