"""Planning and acting: bullet normalization, strategy rendering, the action parse ladder."""

import pytest

from conftest import RaisingBackend
from elite._http import TransportError
from elite.backends import ScriptedBackend, ScriptRule
from elite.gridhouse import NOOP, Action, Skill
from elite.planning import (
    ACT_ATTEMPTS,
    ACTION_CORRECTIVE,
    MAX_BULLETS,
    MIN_BULLETS,
    NO_STRATEGIES_LINE,
    coarse_plan,
    format_strategy_section,
    match_action,
    next_action,
)
from elite.pool import StrategyEntry, StrategyKind

CATALOG = ["goto(sink)", "pick(plate)", "place(plate, sink)", "noop"]


def _entry(content: str, kind=StrategyKind.SUCCESS_PATTERN) -> StrategyEntry:
    return StrategyEntry(
        id=1,
        content=content,
        kind=kind,
        plan_trace="p",
        embedding=(1.0,),
        created_episode=0,
    )


def test_coarse_plan_parses_bullets():
    reply = "- go to the sink\n- wash the plate\n- bring it back\n- check the goal"
    backend = ScriptedBackend(default_reply=reply)
    plan = coarse_plan("Clean the plate.", "You are at the counter.", backend)
    assert plan.bullets == (
        "go to the sink",
        "wash the plate",
        "bring it back",
        "check the goal",
    )
    assert plan.raw_text == reply
    assert plan.source_instruction == "Clean the plate."
    assert plan.degraded is False
    assert plan.normalized is False
    prompt = backend.transcript[0][0].last_user_content()
    assert "Write a high-level plan" in prompt
    assert "Clean the plate." in prompt
    assert "You are at the counter." in prompt


def test_coarse_plan_accepts_other_bullet_markers():
    backend = ScriptedBackend(default_reply="1. first\n2) second\n* third\n• fourth")
    plan = coarse_plan("x", "y", backend)
    assert plan.bullets == ("first", "second", "third", "fourth")


def test_coarse_plan_truncates_excess_bullets():
    reply = "\n".join(f"- step {i}" for i in range(9))
    plan = coarse_plan("x", "y", ScriptedBackend(default_reply=reply))
    assert len(plan.bullets) == MAX_BULLETS
    assert plan.normalized is True
    assert plan.raw_text == reply  # retrieval sees the untouched reply


def test_coarse_plan_pads_sparse_reply():
    plan = coarse_plan("x", "y", ScriptedBackend(default_reply="- only step"))
    assert len(plan.bullets) == MIN_BULLETS
    assert plan.bullets[0] == "only step"
    assert plan.normalized is True


def test_coarse_plan_prose_fallback_uses_lines():
    backend = ScriptedBackend(default_reply="First find the sink.\nThen wash.\nThen return.")
    plan = coarse_plan("x", "y", backend)
    assert plan.bullets == ("First find the sink.", "Then wash.", "Then return.")


def test_coarse_plan_degrades_on_transport_error():
    plan = coarse_plan("Clean the plate.", "obs", RaisingBackend(TransportError("down")))
    assert plan.degraded is True
    assert plan.bullets == ("Clean the plate.",)
    assert plan.raw_text == "Clean the plate."


def test_format_strategy_section():
    assert format_strategy_section([]) == NO_STRATEGIES_LINE
    section = format_strategy_section(
        [_entry("wash first"), _entry("dry after", kind=StrategyKind.RAW)]
    )
    assert section == (
        "Strategies from prior experience:\n"
        "Strategy (success_pattern): wash first\n"
        "Strategy (raw): dry after"
    )


def test_match_action_ladder():
    assert match_action("pick(plate)", CATALOG) == Action(Skill.PICK, ("plate",))
    assert match_action("  Pick( Plate )  ", CATALOG) == Action(Skill.PICK, ("plate",))
    assert match_action("I will goto(sink) now.", CATALOG) == Action(Skill.GOTO, ("sink",))
    assert match_action("PLACE (plate , sink)", CATALOG) == Action(Skill.PLACE, ("plate", "sink"))
    assert match_action("complete gibberish", CATALOG) is None
    assert match_action("open(fridge)", CATALOG) is None  # valid syntax, not in catalog


def test_next_action_first_try():
    backend = ScriptedBackend(default_reply="goto(sink)")
    choice = next_action("Clean the plate.", (), [_entry("wash first")], CATALOG, backend)
    assert choice.action == Action(Skill.GOTO, ("sink",))
    assert choice.unparseable is False
    request = backend.transcript[0][0]
    assert request.messages[0].role == "system"
    user = request.last_user_content()
    assert "Reply with exactly one action" in user
    assert "Strategy (success_pattern): wash first" in user
    assert "Task: Clean the plate." in user
    assert "(no steps taken)" in user
    assert ", ".join(CATALOG) in user


def test_next_action_retries_with_corrective_then_resolves():
    backend = ScriptedBackend(
        [ScriptRule(pattern="Reply with exactly one action", reply="umm", consume=True)],
        default_reply="pick(plate)",
    )
    choice = next_action("t", (), [], CATALOG, backend)
    assert choice.action == Action(Skill.PICK, ("plate",))
    assert len(backend.transcript) == 2
    first = backend.transcript[0][0].last_user_content()
    second = backend.transcript[1][0].last_user_content()
    assert ACTION_CORRECTIVE not in first
    assert second.endswith(ACTION_CORRECTIVE)


def test_next_action_gives_up_with_noop():
    backend = ScriptedBackend(default_reply="I simply refuse")
    choice = next_action("t", (), [], CATALOG, backend)
    assert len(backend.transcript) == ACT_ATTEMPTS
    assert choice.action == NOOP
    assert choice.unparseable is True
    assert choice.reply == "I simply refuse"


def test_next_action_empty_catalog_raises():
    with pytest.raises(ValueError):
        next_action("t", (), [], [], ScriptedBackend(default_reply="noop"))


def test_next_action_transport_error_propagates():
    with pytest.raises(TransportError):
        next_action("t", (), [], CATALOG, RaisingBackend(TransportError("down")))
