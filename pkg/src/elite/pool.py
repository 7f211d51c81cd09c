"""The evolving strategy pool and its delta operations.

The pool is an ordered, id-keyed collection of distilled strategies, each
carrying the embedding of the planning trace that produced it. Mutation
happens only through batches of Add/Revise/Remove delta operations; every
batch bumps the pool version by exactly one. Pools are value-like: applying
a delta returns a new pool and leaves the input untouched, so the snapshot
an episode retrieves from is trivially immutable.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Union

POOL_FORMAT_VERSION = 1
MAX_CONTENT_CHARS = 2000

Vector = tuple[float, ...]
EmbedFn = Callable[[str], Iterable[float]]


class StrategyKind(str, enum.Enum):
    SUCCESS_PATTERN = "success_pattern"
    REPEATABLE_STEPS = "repeatable_steps"
    FAILURE_SUMMARY = "failure_summary"
    AVOIDANCE_GUIDELINE = "avoidance_guideline"
    RAW = "raw"


SUCCESS_KINDS = frozenset({StrategyKind.SUCCESS_PATTERN, StrategyKind.REPEATABLE_STEPS})
FAILURE_KINDS = frozenset({StrategyKind.FAILURE_SUMMARY, StrategyKind.AVOIDANCE_GUIDELINE})


@dataclass(frozen=True)
class StrategyEntry:
    """One unit of distilled knowledge plus the embedding of its originating plan."""

    id: int
    content: str
    kind: StrategyKind
    plan_trace: str
    embedding: Vector
    created_episode: int
    revised_episode: int | None = None
    instruction: str = ""


@dataclass(frozen=True)
class Add:
    content: str
    kind: StrategyKind
    plan_trace: str
    instruction: str = ""


@dataclass(frozen=True)
class Revise:
    target_id: int
    new_content: str
    new_kind: StrategyKind | None = None


@dataclass(frozen=True)
class Remove:
    target_id: int


DeltaOp = Union[Add, Revise, Remove]
RejectedOp = tuple[DeltaOp, str]


@dataclass
class StrategyPool:
    """The knowledge base: ordered entries, a fixed embedding dimension, and an episode-version counter."""

    entries: list[StrategyEntry] = field(default_factory=list)
    dim: int = 256
    next_id: int = 1
    version: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, entry_id: int) -> StrategyEntry | None:
        for entry in self.entries:
            if entry.id == entry_id:
                return entry
        return None

    def ids(self) -> list[int]:
        return [entry.id for entry in self.entries]


class PoolLoadError(ValueError):
    """A pool file is unreadable or violates the pool invariants."""


def new_pool(dim: int) -> StrategyPool:
    """Create an empty pool for embeddings of the given dimension."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    return StrategyPool(entries=[], dim=dim, next_id=1, version=0)


def _clip_content(text: str) -> str:
    return text.strip()[:MAX_CONTENT_CHARS]


def apply_delta(
    pool: StrategyPool,
    ops: list[DeltaOp],
    episode: int,
    embed: EmbedFn,
) -> tuple[StrategyPool, list[RejectedOp]]:
    """Apply a batch of delta operations in order, returning the new pool.

    Malformed ops (absent target ids, empty content) are skipped and reported
    rather than aborting the batch. The version advances by exactly one per
    call regardless of how many ops were accepted. Adds are embedded from
    their plan trace; revisions keep the original embedding.
    """
    entries = list(pool.entries)
    next_id = pool.next_id
    rejected: list[RejectedOp] = []

    for op in ops:
        if isinstance(op, Add):
            content = _clip_content(op.content)
            if not content:
                rejected.append((op, "empty content"))
                continue
            if not op.plan_trace.strip():
                rejected.append((op, "missing plan trace"))
                continue
            vector = tuple(float(v) for v in embed(op.plan_trace))
            if len(vector) != pool.dim:
                raise ValueError(
                    f"embedder produced dim {len(vector)}, pool dim is {pool.dim}"
                )
            entries.append(
                StrategyEntry(
                    id=next_id,
                    content=content,
                    kind=op.kind,
                    plan_trace=op.plan_trace,
                    embedding=vector,
                    created_episode=episode,
                    instruction=op.instruction,
                )
            )
            next_id += 1
        elif isinstance(op, Revise):
            content = _clip_content(op.new_content)
            if not content:
                rejected.append((op, "empty content"))
                continue
            index = next((i for i, e in enumerate(entries) if e.id == op.target_id), None)
            if index is None:
                rejected.append((op, "unknown id"))
                continue
            current = entries[index]
            entries[index] = dataclasses.replace(
                current,
                content=content,
                kind=op.new_kind if op.new_kind is not None else current.kind,
                revised_episode=episode,
            )
        elif isinstance(op, Remove):
            index = next((i for i, e in enumerate(entries) if e.id == op.target_id), None)
            if index is None:
                rejected.append((op, "unknown id"))
                continue
            del entries[index]
        else:
            rejected.append((op, "malformed op"))

    new = StrategyPool(entries=entries, dim=pool.dim, next_id=next_id, version=pool.version + 1)
    return new, rejected


def evict_least_recently_retrieved(
    pool: StrategyPool,
    cap: int,
    last_retrieved: Mapping[int, int],
) -> tuple[StrategyPool, list[int]]:
    """Shrink the pool to `cap` entries, dropping the least recently retrieved first.

    Entries never retrieved count as episode 0; ties evict the smaller id.
    Does not advance the version (eviction is capacity plumbing, not a
    consolidation round).
    """
    if cap <= 0:
        raise ValueError(f"cap must be positive, got {cap}")
    if len(pool.entries) <= cap:
        return pool, []
    ranked = sorted(pool.entries, key=lambda e: (last_retrieved.get(e.id, 0), e.id))
    evicted = [entry.id for entry in ranked[: len(pool.entries) - cap]]
    evicted_set = set(evicted)
    kept = [entry for entry in pool.entries if entry.id not in evicted_set]
    return (
        StrategyPool(entries=kept, dim=pool.dim, next_id=pool.next_id, version=pool.version),
        evicted,
    )


def _entry_to_json(entry: StrategyEntry) -> str:
    record = {
        "id": entry.id,
        "content": entry.content,
        "kind": entry.kind.value,
        "plan_trace": entry.plan_trace,
        "embedding": list(entry.embedding),
        "created_episode": entry.created_episode,
        "revised_episode": entry.revised_episode,
        "instruction": entry.instruction,
    }
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def save_pool(pool: StrategyPool, path: str | Path) -> None:
    """Write the pool as a header line plus one JSON entry per line (UTF-8)."""
    header = {
        "format_version": POOL_FORMAT_VERSION,
        "dim": pool.dim,
        "next_id": pool.next_id,
        "version": pool.version,
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(_entry_to_json(entry) for entry in pool.entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_entry(record: dict, dim: int, line_no: int) -> StrategyEntry:
    try:
        entry_id = int(record["id"])
        content = str(record["content"])
        kind = StrategyKind(record["kind"])
        plan_trace = str(record["plan_trace"])
        embedding = tuple(float(v) for v in record["embedding"])
        created_episode = int(record["created_episode"])
        revised = record.get("revised_episode")
        revised_episode = None if revised is None else int(revised)
        instruction = str(record.get("instruction", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise PoolLoadError(f"line {line_no}: malformed entry ({exc})") from exc
    if len(embedding) != dim:
        raise PoolLoadError(
            f"line {line_no}: embedding has length {len(embedding)}, pool dim is {dim}"
        )
    if not content.strip():
        raise PoolLoadError(f"line {line_no}: empty content")
    if not all(math.isfinite(v) for v in embedding):
        raise PoolLoadError(f"line {line_no}: non-finite embedding value")
    return StrategyEntry(
        id=entry_id,
        content=content,
        kind=kind,
        plan_trace=plan_trace,
        embedding=embedding,
        created_episode=created_episode,
        revised_episode=revised_episode,
        instruction=instruction,
    )


def load_pool(path: str | Path) -> StrategyPool:
    """Read a pool file, validating dimensions, id uniqueness, and the header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PoolLoadError(f"cannot read pool file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise PoolLoadError("line 1: missing header")
    try:
        header = json.loads(lines[0])
        format_version = int(header["format_version"])
        dim = int(header["dim"])
        next_id = int(header["next_id"])
        version = int(header["version"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PoolLoadError(f"line 1: malformed header ({exc})") from exc
    if format_version != POOL_FORMAT_VERSION:
        raise PoolLoadError(f"line 1: unsupported format_version {format_version}")
    if dim <= 0:
        raise PoolLoadError(f"line 1: dim must be positive, got {dim}")

    entries: list[StrategyEntry] = []
    seen: set[int] = set()
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise PoolLoadError(f"line {line_no}: invalid JSON ({exc})") from exc
        entry = _parse_entry(record, dim, line_no)
        if entry.id in seen:
            raise PoolLoadError(f"line {line_no}: duplicate id {entry.id}")
        if entry.id >= next_id:
            raise PoolLoadError(
                f"line {line_no}: id {entry.id} not below header next_id {next_id}"
            )
        seen.add(entry.id)
        entries.append(entry)
    return StrategyPool(entries=entries, dim=dim, next_id=next_id, version=version)
