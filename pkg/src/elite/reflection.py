"""Reflective experience distiller: trajectory in, typed insights out.

Success episodes distill into success patterns and repeatable step
sequences; failures into a root-cause summary and avoidance guidelines.
The supervised variant reflects comparatively against a ground-truth
trajectory. Model output is parsed leniently (first balanced JSON object
anywhere in the reply), retried with a corrective suffix, and finally
degraded to a single raw insight, so distillation is total over whatever
the backend says.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass

from elite._http import TransportError
from elite.backends import Backend, chat, request_from
from elite.pool import FAILURE_KINDS, SUCCESS_KINDS, StrategyKind
from elite.prompts import CORRECTIVE_SUFFIX, DEFAULT_LIBRARY, PromptLibrary
from elite.trajectory import Trajectory, action_sequence, render_trajectory

logger = logging.getLogger(__name__)

MAX_INSIGHTS = 8
PARSE_ATTEMPTS = 3


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class ReflectionMode(str, enum.Enum):
    ONLINE = "online"
    COMPARATIVE = "comparative"


_ALLOWED = {Outcome.SUCCESS: SUCCESS_KINDS, Outcome.FAILURE: FAILURE_KINDS}

_KIND_MENU = {
    Outcome.SUCCESS: '"success_pattern" or "repeatable_steps"',
    Outcome.FAILURE: '"failure_summary" or "avoidance_guideline"',
}


@dataclass(frozen=True)
class Insight:
    kind: StrategyKind
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("insight text must be non-empty")


@dataclass(frozen=True)
class Reflection:
    task_id: str
    outcome: Outcome
    insights: tuple[Insight, ...]
    mode: ReflectionMode

    def __post_init__(self) -> None:
        if not self.insights:
            raise ValueError("reflection must carry at least one insight")


class ReflectionFailedError(RuntimeError):
    """The backend was unreachable; this episode yields no reflection."""


def extract_first_json_object(text: str) -> dict | None:
    """Return the first balanced {...} object in the text that parses, else None.

    Scans with string/escape awareness so braces inside JSON strings do not
    confuse the balance count. Tolerates surrounding prose and code fences.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        value = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(value, dict):
                        return value
                    break
        start = text.find("{", start + 1)
    return None


def _coerce_kind(raw_kind: object, outcome: Outcome) -> StrategyKind:
    try:
        kind = StrategyKind(raw_kind)
    except ValueError:
        logger.warning("unknown insight kind %r, coercing to raw", raw_kind)
        return StrategyKind.RAW
    if kind is StrategyKind.RAW:
        return kind
    if kind not in _ALLOWED[outcome]:
        logger.warning("insight kind %s inconsistent with %s outcome, coercing to raw", kind.value, outcome.value)
        return StrategyKind.RAW
    return kind


def parse_insights(reply: str, outcome: Outcome) -> list[Insight] | None:
    """Parse a model reply into insights, or None if no usable object exists."""
    obj = extract_first_json_object(reply)
    if obj is None:
        return None
    items = obj.get("insights")
    if not isinstance(items, list):
        return None
    insights: list[Insight] = []
    for item in items:
        if not isinstance(item, dict):
            continue
        text = item.get("text")
        if not isinstance(text, str) or not text.strip():
            continue
        kind = _coerce_kind(item.get("kind"), outcome)
        insights.append(Insight(kind=kind, text=text.strip()))
    if not insights:
        return None
    if len(insights) > MAX_INSIGHTS:
        logger.warning("reply carried %d insights, keeping first %d", len(insights), MAX_INSIGHTS)
        insights = insights[:MAX_INSIGHTS]
    return insights


def _raw_fallback(reply: str) -> Insight:
    text = reply.strip() or "(empty reply)"
    return Insight(kind=StrategyKind.RAW, text=text)


def _distill(
    prompt: str,
    outcome: Outcome,
    mode: ReflectionMode,
    task_id: str,
    backend: Backend,
) -> Reflection:
    reply = ""
    for attempt in range(PARSE_ATTEMPTS):
        user = prompt if attempt == 0 else prompt + "\n\n" + CORRECTIVE_SUFFIX
        try:
            reply = chat(backend, request_from("", user))
        except TransportError as exc:
            raise ReflectionFailedError(f"reflection backend unavailable: {exc}") from exc
        insights = parse_insights(reply, outcome)
        if insights is not None:
            return Reflection(task_id=task_id, outcome=outcome, insights=tuple(insights), mode=mode)
    logger.warning("reflection output unparseable after %d attempts, keeping raw reply", PARSE_ATTEMPTS)
    return Reflection(task_id=task_id, outcome=outcome, insights=(_raw_fallback(reply),), mode=mode)


def reflect(
    instruction: str,
    trajectory: Trajectory,
    outcome: Outcome,
    backend: Backend,
    *,
    task_id: str = "",
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> Reflection:
    """Distill one finished episode into insights (Reflection)."""
    if not trajectory:
        raise ValueError("cannot reflect on an empty trajectory")
    template = "reflect_success" if outcome is Outcome.SUCCESS else "reflect_failure"
    prompt = library.render(
        template,
        instruction=instruction,
        trajectory=render_trajectory(trajectory),
    )
    return _distill(prompt, outcome, ReflectionMode.ONLINE, task_id, backend)


def comparative_prompt(
    instruction: str,
    trajectory: Trajectory,
    oracle: Trajectory,
    outcome: Outcome,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> str:
    return library.render(
        "reflect_comparative",
        instruction=instruction,
        agent_trajectory=render_trajectory(trajectory),
        agent_actions=action_sequence(trajectory),
        oracle_trajectory=render_trajectory(oracle),
        oracle_actions=action_sequence(oracle),
        allowed_kinds=_KIND_MENU[outcome],
    )


def reflect_comparative(
    instruction: str,
    trajectory: Trajectory,
    oracle: Trajectory,
    outcome: Outcome,
    backend: Backend,
    *,
    task_id: str = "",
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> Reflection:
    """Distill an episode by contrasting it with a ground-truth trajectory."""
    if not oracle:
        raise ValueError("comparative reflection requires a ground-truth trajectory")
    prompt = comparative_prompt(instruction, trajectory, oracle, outcome, library)
    return _distill(prompt, outcome, ReflectionMode.COMPARATIVE, task_id, backend)
