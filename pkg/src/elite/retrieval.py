"""Strategy retrieval: intent-aware top-k plus baseline variants.

The primary mode scores each pool entry by cosine similarity between the
embedding of the current coarse plan and the entry's stored plan-trace
embedding, then takes the k best. Because the objective is separable, the
top-k set is exactly the k individually highest-scoring entries; ties break
toward the smaller id so retrieval is deterministic. The TF-IDF modes exist
as lexical baselines (matching on surface text instead of intent), `all`
and `random` and `none` as ablation endpoints.
"""

from __future__ import annotations

import enum
import math
import random
import re
from collections import Counter
from dataclasses import dataclass

from elite.embedding import cosine
from elite.pool import StrategyEntry, StrategyPool, Vector

DEFAULT_K = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class RetrievalMode(str, enum.Enum):
    COT = "cot"
    TFIDF_CONTENT = "tfidf_content"
    TFIDF_INSTRUCTION = "tfidf_instruction"
    ALL = "all"
    RANDOM = "random"
    NONE = "none"


@dataclass(frozen=True)
class ScoredEntry:
    entry: StrategyEntry
    score: float


def top_k_by_cosine(pool: StrategyPool, query: Vector, k: int) -> list[ScoredEntry]:
    """Return the k entries most similar to the query vector, best first.

    Ties in score resolve toward the smaller entry id. Fewer than k entries
    means the whole pool comes back, ranked.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    scored = [ScoredEntry(entry, cosine(query, entry.embedding)) for entry in pool.entries]
    scored.sort(key=lambda s: (-s.score, s.entry.id))
    return scored[:k]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def _tfidf_vectors(documents: list[str]) -> list[dict[str, float]]:
    token_lists = [tokenize(doc) for doc in documents]
    n = len(documents)
    df: Counter[str] = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    idf = {term: math.log(n / (1 + count)) + 1.0 for term, count in df.items()}
    vectors: list[dict[str, float]] = []
    for tokens in token_lists:
        tf = Counter(tokens)
        vectors.append({term: count * idf[term] for term, count in tf.items()})
    return vectors


def _sparse_cosine(a: dict[str, float], b: dict[str, float]) -> float:
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(weight * b[term] for term, weight in a.items() if term in b)
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def top_k_by_tfidf(
    pool: StrategyPool, query_text: str, k: int, *, field: str = "content"
) -> list[ScoredEntry]:
    """Lexical top-k: TF-IDF weight the chosen entry field plus the query, rank by sparse cosine.

    The query participates in document-frequency counts, so idf reflects the
    corpus the comparison actually runs over.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if field not in ("content", "instruction"):
        raise ValueError(f"field must be 'content' or 'instruction', got {field!r}")
    if not pool.entries:
        return []
    documents = [getattr(entry, field) for entry in pool.entries]
    vectors = _tfidf_vectors(documents + [query_text])
    query_vec = vectors[-1]
    scored = [
        ScoredEntry(entry, _sparse_cosine(vec, query_vec))
        for entry, vec in zip(pool.entries, vectors[:-1])
    ]
    scored.sort(key=lambda s: (-s.score, s.entry.id))
    return scored[:k]


def retrieve_scored(
    pool: StrategyPool,
    mode: RetrievalMode,
    k: int = DEFAULT_K,
    *,
    query_vector: Vector | None = None,
    query_text: str = "",
    rng: random.Random | None = None,
) -> list[tuple[StrategyEntry, float | None]]:
    """Dispatch to the retrieval variant named by `mode`, keeping scores where they exist.

    `cot` requires query_vector (the embedded coarse plan); the tfidf modes
    require query_text; `random` requires rng. `all` ignores k and returns
    the whole pool in id order; `none` always returns []. Modes without a
    similarity notion report None scores.
    """
    if mode is RetrievalMode.NONE:
        return []
    if not pool.entries:
        return []
    if mode is RetrievalMode.ALL:
        return [(e, None) for e in sorted(pool.entries, key=lambda e: e.id)]
    if mode is RetrievalMode.COT:
        if query_vector is None:
            raise ValueError("cot retrieval requires query_vector")
        return [(s.entry, s.score) for s in top_k_by_cosine(pool, query_vector, k)]
    if mode is RetrievalMode.TFIDF_CONTENT:
        return [(s.entry, s.score) for s in top_k_by_tfidf(pool, query_text, k, field="content")]
    if mode is RetrievalMode.TFIDF_INSTRUCTION:
        return [(s.entry, s.score) for s in top_k_by_tfidf(pool, query_text, k, field="instruction")]
    if mode is RetrievalMode.RANDOM:
        if rng is None:
            raise ValueError("random retrieval requires rng")
        count = min(k, len(pool.entries))
        return [(e, None) for e in rng.sample(pool.entries, count)]
    raise ValueError(f"unknown retrieval mode {mode!r}")


def retrieve(
    pool: StrategyPool,
    mode: RetrievalMode,
    k: int = DEFAULT_K,
    *,
    query_vector: Vector | None = None,
    query_text: str = "",
    rng: random.Random | None = None,
) -> list[StrategyEntry]:
    """As retrieve_scored, scores dropped."""
    return [
        entry
        for entry, _ in retrieve_scored(
            pool, mode, k, query_vector=query_vector, query_text=query_text, rng=rng
        )
    ]
