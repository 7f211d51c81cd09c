"""Coarse planning and step-level action selection.

Before acting, the agent writes a short high-level plan; the verbatim plan
text is what gets embedded for retrieval, so the bullet normalization here
never touches what retrieval sees. During execution the policy prompt
carries the retrieved strategies, the instruction, the running history, and
the environment's current action catalog, and the reply is resolved against
that catalog through a tolerant parse ladder. An unresolvable reply becomes
a noop step rather than an exception, so episodes always run to a verdict.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from elite._http import TransportError
from elite.backends import Backend, ChatMessage, ChatRequest, chat
from elite.gridhouse import NOOP, Action, parse_action
from elite.pool import StrategyEntry
from elite.prompts import DEFAULT_LIBRARY, PromptLibrary
from elite.trajectory import Trajectory, render_trajectory

logger = logging.getLogger(__name__)

MIN_BULLETS = 3
MAX_BULLETS = 6
ACT_ATTEMPTS = 3

NO_STRATEGIES_LINE = "No prior strategies are available."
UNPARSEABLE_FEEDBACK = "unparseable action"

ACTION_CORRECTIVE = (
    "Your previous reply was not a valid action. Reply with exactly one "
    "action from the valid action list and nothing else."
)

_FILLER_BULLETS = (
    "survey the room and locate the key objects",
    "carry out the remaining steps toward the goal",
    "verify every goal condition before stopping",
)

_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")


@dataclass(frozen=True)
class CoarsePlan:
    bullets: tuple[str, ...]
    raw_text: str
    source_instruction: str
    degraded: bool = False
    normalized: bool = False


@dataclass(frozen=True)
class ActionChoice:
    action: Action
    reply: str
    unparseable: bool = False


def _extract_bullets(text: str) -> list[str]:
    marked = [m.group(1) for line in text.splitlines() if (m := _BULLET_RE.match(line))]
    if marked:
        return marked
    return [line.strip() for line in text.splitlines() if line.strip()]


def coarse_plan(
    instruction: str,
    observation: str,
    backend: Backend,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> CoarsePlan:
    """Generate the high-level plan whose text becomes the retrieval query."""
    prompt = library.render("coarse_plan", instruction=instruction, observation=observation)
    try:
        reply = chat(backend, ChatRequest(messages=(ChatMessage("user", prompt),)))
    except TransportError as exc:
        logger.warning("coarse planner backend unavailable (%s), degrading to the instruction", exc)
        return CoarsePlan(
            bullets=(instruction,),
            raw_text=instruction,
            source_instruction=instruction,
            degraded=True,
        )
    bullets = _extract_bullets(reply)
    normalized = False
    if len(bullets) > MAX_BULLETS:
        bullets = bullets[:MAX_BULLETS]
        normalized = True
    while len(bullets) < MIN_BULLETS:
        bullets.append(_FILLER_BULLETS[len(bullets) % len(_FILLER_BULLETS)])
        normalized = True
    return CoarsePlan(
        bullets=tuple(bullets),
        raw_text=reply,
        source_instruction=instruction,
        normalized=normalized,
    )


def format_strategy_section(entries: list[StrategyEntry]) -> str:
    """Render retrieved strategies (already in descending score order) for the policy prompt."""
    if not entries:
        return NO_STRATEGIES_LINE
    lines = ["Strategies from prior experience:"]
    lines.extend(f"Strategy ({entry.kind.value}): {entry.content}" for entry in entries)
    return "\n".join(lines)


def _normalize_reply(text: str) -> str:
    return "".join(text.split()).casefold()


def match_action(reply: str, catalog: list[str]) -> Action | None:
    """Resolve a model reply to a catalog action: exact, normalized, then substring."""
    stripped = reply.strip()
    for entry in catalog:
        if stripped == entry:
            return parse_action(entry)
    normalized = _normalize_reply(reply)
    for entry in catalog:
        if normalized == _normalize_reply(entry):
            return parse_action(entry)
    for entry in catalog:
        if _normalize_reply(entry) in normalized:
            return parse_action(entry)
    return None


def next_action(
    instruction: str,
    history: Trajectory,
    strategies: list[StrategyEntry],
    catalog: list[str],
    backend: Backend,
    *,
    library: PromptLibrary = DEFAULT_LIBRARY,
) -> ActionChoice:
    """Pick the next action; a reply that never resolves becomes a noop step.

    Transport errors propagate so the caller can abort the episode.
    """
    if not catalog:
        raise ValueError("action catalog is empty")
    system = library.text("act_system")
    user = library.render(
        "act_user",
        strategy_section=format_strategy_section(strategies),
        instruction=instruction,
        history=render_trajectory(history),
        catalog=", ".join(catalog),
    )
    reply = ""
    for attempt in range(ACT_ATTEMPTS):
        content = user if attempt == 0 else user + "\n\n" + ACTION_CORRECTIVE
        request = ChatRequest(
            messages=(ChatMessage("system", system), ChatMessage("user", content))
        )
        reply = chat(backend, request)
        action = match_action(reply, catalog)
        if action is not None:
            return ActionChoice(action=action, reply=reply)
    logger.warning("no catalog action matched after %d attempts, emitting noop", ACT_ATTEMPTS)
    return ActionChoice(action=NOOP, reply=reply, unparseable=True)
