"""Context consolidator: reflection + full pool in, validated delta ops out.

The consolidator model sees every current pool entry and the fresh insights
and decides what is novel, redundant, or worth revising. The engine's job
here is strictly structural: parse the proposed ops, reject the ones that
reference unknown ids or carry empty content, and hand the survivors to the
pool. Semantic judgments (dedup, merging, contradiction) belong to the
model. When the model's output is unusable the insights degrade to direct
Add operations, so an episode's learning signal is never silently dropped.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from elite._http import TransportError
from elite.backends import Backend, chat, request_from
from elite.pool import (
    Add,
    DeltaOp,
    RejectedOp,
    Remove,
    Revise,
    StrategyKind,
    StrategyPool,
    apply_delta,
)
from elite.prompts import CORRECTIVE_SUFFIX, DEFAULT_LIBRARY, PromptLibrary
from elite.reflection import Reflection, extract_first_json_object

logger = logging.getLogger(__name__)

PARSE_ATTEMPTS = 3
POOL_RENDER_CHARS = 500


@dataclass
class ConsolidationResult:
    proposed: list[DeltaOp] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)
    rationale: str | None = None
    fallback: bool = False


@dataclass
class ConsolidationReport:
    result: ConsolidationResult
    apply_rejected: list[RejectedOp] = field(default_factory=list)


def render_pool(pool: StrategyPool) -> str:
    """Every entry once, id order, `[id] (kind) content`, content capped for prompt size."""
    if not pool.entries:
        return "(empty pool)"
    lines = []
    for entry in sorted(pool.entries, key=lambda e: e.id):
        content = entry.content
        if len(content) > POOL_RENDER_CHARS:
            content = content[: POOL_RENDER_CHARS - 1] + "…"
        lines.append(f"[{entry.id}] ({entry.kind.value}) {content}")
    return "\n".join(lines)


def _render_insights(reflection: Reflection) -> str:
    return "\n".join(f"- ({i.kind.value}) {i.text}" for i in reflection.insights)


def direct_adds(reflection: Reflection, plan_trace: str, instruction: str = "") -> list[Add]:
    """One Add per insight, bypassing the consolidator model entirely."""
    return [
        Add(content=i.text, kind=i.kind, plan_trace=plan_trace, instruction=instruction)
        for i in reflection.insights
    ]


def _coerce_op_kind(raw_kind: object, default: StrategyKind = StrategyKind.RAW) -> StrategyKind:
    if raw_kind is None:
        return default
    try:
        return StrategyKind(raw_kind)
    except ValueError:
        logger.warning("unknown op kind %r, coercing to raw", raw_kind)
        return StrategyKind.RAW


def _op_id(item: dict) -> int | None:
    value = item.get("id")
    if isinstance(value, bool) or not isinstance(value, int):
        return None
    return value


def _parse_ops(
    obj: dict,
    pool: StrategyPool,
    plan_trace: str,
    instruction: str,
) -> tuple[list[DeltaOp], list[tuple[str, str]]] | None:
    items = obj.get("ops")
    if not isinstance(items, list):
        return None
    known_ids = set(pool.ids())
    proposed: list[DeltaOp] = []
    rejected: list[tuple[str, str]] = []
    for item in items:
        raw = json.dumps(item, sort_keys=True, ensure_ascii=False, default=repr)
        if not isinstance(item, dict):
            rejected.append((raw, "not an object"))
            continue
        name = item.get("op")
        if name == "add":
            content = item.get("content")
            if not isinstance(content, str) or not content.strip():
                rejected.append((raw, "empty content"))
                continue
            proposed.append(
                Add(
                    content=content,
                    kind=_coerce_op_kind(item.get("kind")),
                    plan_trace=plan_trace,
                    instruction=instruction,
                )
            )
        elif name == "revise":
            target = _op_id(item)
            if target is None or target not in known_ids:
                rejected.append((raw, "unknown id"))
                continue
            content = item.get("content")
            if not isinstance(content, str) or not content.strip():
                rejected.append((raw, "empty content"))
                continue
            kind = item.get("kind")
            proposed.append(
                Revise(
                    target_id=target,
                    new_content=content,
                    new_kind=None if kind is None else _coerce_op_kind(kind),
                )
            )
        elif name == "remove":
            target = _op_id(item)
            if target is None or target not in known_ids:
                rejected.append((raw, "unknown id"))
                continue
            proposed.append(Remove(target_id=target))
        else:
            rejected.append((raw, "unknown op"))
    return proposed, rejected


def _fallback_result(reflection: Reflection, plan_trace: str, instruction: str) -> ConsolidationResult:
    return ConsolidationResult(
        proposed=list(direct_adds(reflection, plan_trace, instruction)),
        fallback=True,
    )


def propose_deltas(
    reflection: Reflection,
    pool: StrategyPool,
    backend: Backend,
    *,
    plan_trace: str,
    instruction: str = "",
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> ConsolidationResult:
    """Ask the consolidator model for delta ops against a pool snapshot.

    Adds inherit the episode's plan trace (that is what gets embedded), so
    the trace must accompany the reflection. Unusable output after the
    corrective retries, or a dead backend, degrades to one Add per insight.
    """
    if not reflection.insights:
        raise ValueError("reflection carries no insights")
    prompt = library.render(
        "consolidate",
        pool=render_pool(pool),
        outcome=reflection.outcome.value,
        insights=_render_insights(reflection),
    )
    for attempt in range(PARSE_ATTEMPTS):
        user = prompt if attempt == 0 else prompt + "\n\n" + CORRECTIVE_SUFFIX
        try:
            reply = chat(backend, request_from("", user))
        except TransportError as exc:
            logger.warning("consolidation backend unavailable (%s), falling back to direct adds", exc)
            return _fallback_result(reflection, plan_trace, instruction)
        obj = extract_first_json_object(reply)
        if obj is None:
            continue
        parsed = _parse_ops(obj, pool, plan_trace, instruction)
        if parsed is None:
            continue
        proposed, rejected = parsed
        rationale = obj.get("rationale")
        return ConsolidationResult(
            proposed=proposed,
            rejected=rejected,
            rationale=rationale if isinstance(rationale, str) else None,
        )
    logger.warning("consolidator output unparseable after %d attempts, falling back to direct adds", PARSE_ATTEMPTS)
    return _fallback_result(reflection, plan_trace, instruction)


def consolidate(
    reflection: Reflection,
    pool: StrategyPool,
    episode: int,
    backend: Backend,
    embed,
    *,
    plan_trace: str,
    instruction: str = "",
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> tuple[StrategyPool, ConsolidationReport]:
    """Propose deltas and apply them, returning the next pool version."""
    result = propose_deltas(
        reflection,
        pool,
        backend,
        plan_trace=plan_trace,
        instruction=instruction,
        library=library,
    )
    new_pool, apply_rejected = apply_delta(pool, result.proposed, episode, embed)
    if apply_rejected:
        logger.warning("pool rejected %d consolidation ops", len(apply_rejected))
    return new_pool, ConsolidationReport(result=result, apply_rejected=apply_rejected)
