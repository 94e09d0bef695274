"""Endpoint access: chat completions, JSON repair, embeddings.

Everything network-shaped lives here. The chat client speaks the common
chat-completions wire format (messages array, temperature 0) against any
OpenAI-compatible base URL, with bounded retry and a semaphore capping
parallel requests. Transports are injectable so tests run without
sockets.

The offline embedder is fully specified so independent implementations
agree bucket for bucket: slide a window of 3 characters over the raw
text (no padding, no case folding), hash each trigram's UTF-8 bytes with
FNV-1a 64-bit, add 1.0 to bucket ``hash % dimension``, then L2-normalize
the vector. Texts shorter than 3 characters embed to the zero vector,
and cosine similarity against a zero vector is 0.0 by convention.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import ConfigError, DataError, ExtractionError, TransportError
from .normalize import SkillAliasMap, normalize_record
from .prompts import PARSING_INSTRUCTION
from .schema import ResumeRecord, SchemaError, parse_record

log = logging.getLogger(__name__)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

MIN_EMBEDDING_DIM = 64


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_id: str
    api_key: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    max_parallel_requests: int = 4
    backoff_base: float = 0.5

    def __post_init__(self):
        if not self.base_url:
            raise ConfigError("endpoint base_url is required")
        if not self.model_id:
            raise ConfigError("endpoint model_id is required")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_parallel_requests < 1:
            raise ConfigError("max_parallel_requests must be >= 1")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)


def _as_values(vector) -> tuple[float, ...]:
    return tuple(getattr(vector, "values", vector))


def cosine_similarity(a, b) -> float:
    """Cosine of two vectors; 0.0 whenever either has zero norm."""
    va, vb = _as_values(a), _as_values(b)
    if len(va) != len(vb):
        raise ValueError("dimension mismatch")
    dot = sum(x * y for x, y in zip(va, vb))
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(y * y for y in vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def trigram_counts(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for i in range(len(text) - 2):
        gram = text[i : i + 3]
        counts[gram] = counts.get(gram, 0) + 1
    return counts


class OfflineEmbedder:
    """Deterministic character-trigram hashing embedder (see module doc)."""

    def __init__(self, dimension: int = 256):
        if dimension < MIN_EMBEDDING_DIM:
            raise ConfigError(f"embedding dimension must be >= {MIN_EMBEDDING_DIM}")
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        buckets = [0.0] * self.dimension
        for gram, count in trigram_counts(text).items():
            buckets[_fnv1a_64(gram.encode("utf-8")) % self.dimension] += float(count)
        norm = math.sqrt(sum(v * v for v in buckets))
        if norm > 0.0:
            buckets = [v / norm for v in buckets]
        return EmbeddingVector(values=tuple(buckets))


def _default_transport(config: EndpointConfig, path: str, payload: dict) -> dict:
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    try:
        response = requests.post(
            config.base_url.rstrip("/") + path,
            json=payload,
            headers=headers,
            timeout=config.timeout,
        )
    except requests.RequestException as exc:
        raise TransportError(f"request failed: {exc}") from exc
    if response.status_code == 429 or response.status_code >= 500:
        raise TransportError(f"endpoint returned {response.status_code}")
    if response.status_code != 200:
        # Client errors are not retried; retrying identical bad input
        # cannot help.
        raise ExtractionError(
            f"endpoint returned {response.status_code}", raw_response=response.text
        )
    try:
        return response.json()
    except ValueError as exc:
        raise TransportError(f"endpoint returned non-JSON body: {exc}") from exc


class ChatCompletionClient:
    """Thin chat-completions client with bounded retry and parallelism.

    ``transport(config, path, payload) -> dict`` may be injected for
    tests; the default posts over HTTP. Retries apply only to
    TransportError, with exponential backoff
    ``backoff_base * 2**attempt`` seconds, and every retry is logged.
    """

    def __init__(self, config: EndpointConfig, transport=None, sleeper=time.sleep, log_dir=None):
        self.config = config
        self._transport = transport or _default_transport
        self._sleep = sleeper
        self._semaphore = threading.Semaphore(config.max_parallel_requests)
        self._log_dir = Path(log_dir) if log_dir else None
        self._log_lock = threading.Lock()

    def _request(self, path: str, payload: dict) -> dict:
        last: TransportError | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._semaphore:
                    result = self._transport(self.config, path, payload)
                self._transcribe(path, payload, result)
                return result
            except TransportError as exc:
                last = exc
                if attempt < self.config.max_retries:
                    delay = self.config.backoff_base * (2**attempt)
                    log.warning(
                        "request to %s failed (%s), retry %d/%d in %.2fs",
                        path, exc, attempt + 1, self.config.max_retries, delay,
                    )
                    self._sleep(delay)
        assert last is not None
        raise last

    def _transcribe(self, path: str, payload: dict, result: dict) -> None:
        if self._log_dir is None:
            return
        self._log_dir.mkdir(parents=True, exist_ok=True)
        line = json.dumps({"path": path, "request": payload, "response": result})
        with self._log_lock:
            with open(self._log_dir / "transcript.jsonl", "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def complete(self, messages: list[dict]) -> str:
        payload = {
            "model": self.config.model_id,
            "messages": messages,
            "temperature": 0,
        }
        result = self._request("/chat/completions", payload)
        try:
            content = result["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("completion content is not a string")
        return content

    def embed_remote(self, text: str) -> list[float]:
        payload = {"model": self.config.model_id, "input": text}
        result = self._request("/embeddings", payload)
        try:
            vector = result["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed embedding response: {exc}") from exc
        return [float(v) for v in vector]


class RemoteEmbedder:
    def __init__(self, client: ChatCompletionClient, dimension: int):
        if dimension < MIN_EMBEDDING_DIM:
            raise ConfigError(f"embedding dimension must be >= {MIN_EMBEDDING_DIM}")
        self._client = client
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        values = self._client.embed_remote(text)
        if len(values) != self.dimension:
            raise TransportError(
                f"embedding dimension {len(values)} != declared {self.dimension}"
            )
        return EmbeddingVector(values=tuple(values))


_FENCE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```\s*$", re.DOTALL)


def repair_json(text: str) -> tuple[str, tuple[str, ...]]:
    """Strip trivially recoverable wrapping from a model response.

    Two repairs only: markdown code fences, and prose before the first
    '{' or after the last '}'. Content strictly inside the outermost
    braces is never touched. Returns (candidate, repair tags).
    """
    repairs: list[str] = []
    m = _FENCE.match(text)
    if m:
        text = m.group(1)
        repairs.append("code_fence")
    first = text.find("{")
    last = text.rfind("}")
    if first != -1 and last > first:
        if text[:first].strip():
            repairs.append("leading_prose")
        if text[last + 1 :].strip():
            repairs.append("trailing_prose")
        text = text[first : last + 1]
    return text, tuple(repairs)


@dataclass(frozen=True)
class ParseResult:
    record: ResumeRecord
    repairs_applied: tuple[str, ...]
    raw_response: str


def parse_resume(
    raw_text: str,
    client: ChatCompletionClient,
    aliases: SkillAliasMap | None = None,
) -> ParseResult:
    """Parse resume text into a normalized ResumeRecord via the endpoint.

    The model sees the versioned parsing instruction as the system
    message and the raw text as the user message at temperature 0. The
    response goes through repair_json, strict schema validation, then
    normalize_record. Irrecoverable output raises ExtractionError with
    the raw payload attached for audit.
    """
    if raw_text.strip() == "":
        raise DataError("refusing to parse empty resume text")
    response = client.complete(
        [
            {"role": "system", "content": PARSING_INSTRUCTION},
            {"role": "user", "content": raw_text},
        ]
    )
    candidate, repairs = repair_json(response)
    try:
        record = parse_record(candidate)
    except SchemaError as exc:
        raise ExtractionError(
            f"response failed schema validation: {exc}", raw_response=response
        ) from exc
    record, _ = normalize_record(record, aliases)
    return ParseResult(record=record, repairs_applied=repairs, raw_response=response)
