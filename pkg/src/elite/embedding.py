"""Text embedders and cosine similarity.

Two interchangeable embedders sit behind one abstraction: a remote client for
an embeddings-compatible HTTP endpoint, and a local feature-hashing embedder
that is deterministic down to the bit, so tests and desk-scale runs need no
network at all.
"""

from __future__ import annotations

import math
import os
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

from elite._http import TransportError, post_json

EMBED_API_KEY_ENV = "ELITE_EMBED_API_KEY"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_WS_RUN = re.compile(r"\s+")

Vector = tuple[float, ...]


class Embedder(ABC):
    """Maps text to a unit-norm vector of fixed dimension."""

    @property
    @abstractmethod
    def dim(self) -> int:
        raise NotImplementedError

    @abstractmethod
    def embed(self, text: str) -> Vector:
        raise NotImplementedError


def normalize_text(text: str) -> str:
    """Lowercase, collapse each whitespace run to one space, trim."""
    return _WS_RUN.sub(" ", text.lower()).strip()


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _unit(values: list[float]) -> Vector:
    norm = math.sqrt(sum(v * v for v in values))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return tuple(v / norm for v in values)


@dataclass(frozen=True)
class LocalHashEmbedderConfig:
    dim: int = 256
    ngram: int = 3

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        if self.ngram < 1:
            raise ValueError(f"ngram must be >= 1, got {self.ngram}")


def local_embed(text: str, config: LocalHashEmbedderConfig) -> Vector:
    """Hash byte n-grams of the normalized text into a unit-norm bucket vector.

    Each contiguous byte n-gram of the normalized UTF-8 text (the whole text
    as a single gram when shorter than n) adds 1.0 to bucket
    fnv1a64(gram) mod dim; the bucket vector is then L2-normalized.
    """
    normalized = normalize_text(text)
    if not normalized:
        raise ValueError("text is empty after normalization")
    data = normalized.encode("utf-8")
    n = config.ngram
    buckets = [0.0] * config.dim
    if len(data) < n:
        buckets[fnv1a64(data) % config.dim] += 1.0
    else:
        for i in range(len(data) - n + 1):
            buckets[fnv1a64(data[i : i + n]) % config.dim] += 1.0
    return _unit(buckets)


class LocalHashEmbedder(Embedder):
    """Deterministic n-gram hashing embedder; identical text gives bitwise-identical vectors."""

    def __init__(self, config: LocalHashEmbedderConfig | None = None) -> None:
        self._config = config if config is not None else LocalHashEmbedderConfig()

    @property
    def dim(self) -> int:
        return self._config.dim

    def embed(self, text: str) -> Vector:
        return local_embed(text, self._config)


@dataclass
class RemoteEmbedderConfig:
    base_url: str
    model: str
    dim: int = 1024
    api_key: str = ""
    timeout: float = 120.0
    max_in_flight: int = 4

    def resolved_api_key(self) -> str:
        return os.environ.get(EMBED_API_KEY_ENV) or self.api_key


class RemoteEmbedder(Embedder):
    """Client for an embeddings-compatible HTTP endpoint.

    POSTs {model, input}, reads data[0].embedding, re-normalizes locally, and
    requires the response dimension to match the configured one. Responses
    are memoized by exact input text for the lifetime of the client.
    """

    def __init__(self, config: RemoteEmbedderConfig, sleep=None) -> None:
        self._config = config
        self._sleep = sleep
        self._gate = threading.Semaphore(config.max_in_flight)
        self._memo: dict[str, Vector] = {}
        self._memo_lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self._config.dim

    def embed(self, text: str) -> Vector:
        if not text:
            raise ValueError("text must be non-empty")
        with self._memo_lock:
            cached = self._memo.get(text)
        if cached is not None:
            return cached
        payload = {"model": self._config.model, "input": text}
        with self._gate:
            reply = post_json(
                self._config.base_url.rstrip("/") + "/embeddings",
                payload,
                api_key=self._config.resolved_api_key(),
                timeout=self._config.timeout,
                sleep=self._sleep,
            )
        vector = remote_embedding_from_response(reply, self._config.dim)
        with self._memo_lock:
            self._memo[text] = vector
        return vector


def remote_embedding_from_response(reply: object, dim: int) -> Vector:
    """Extract data[0].embedding and unit-normalize; dimension mismatches are config errors."""
    try:
        values = [float(v) for v in reply["data"][0]["embedding"]]  # type: ignore[index]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise TransportError(f"malformed embeddings response: {exc}") from exc
    if len(values) != dim:
        raise EmbedderConfigError(
            f"endpoint returned {len(values)}-dim embedding, configured dim is {dim}"
        )
    return _unit(values)


class EmbedderConfigError(ValueError):
    """Embedder configuration does not match what the endpoint serves."""


def cosine(a, b) -> float:
    """Cosine similarity (a.b)/(|a||b|); raises on length mismatch or zero vectors."""
    if len(a) != len(b):
        raise ValueError(f"vector lengths differ: {len(a)} vs {len(b)}")
    dot = 0.0
    norm_a = 0.0
    norm_b = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine is undefined for zero vectors")
    # the product of two tiny squared norms can underflow to 0.0; roots first
    return dot / (math.sqrt(norm_a) * math.sqrt(norm_b))
