"""Trajectory records and their prompt rendering.

A trajectory is the sequence of (observation, action, feedback) steps an
episode produced. Prompts render it one line per step with observations
truncated, so context grows linearly and long horizons stay bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

OBS_SUMMARY_CHARS = 200


@dataclass(frozen=True)
class TrajectoryStep:
    index: int
    observation: str
    action: str
    feedback: str


Trajectory = tuple[TrajectoryStep, ...]


def summarize_observation(observation: str) -> str:
    flat = " ".join(observation.split())
    if len(flat) <= OBS_SUMMARY_CHARS:
        return flat
    return flat[: OBS_SUMMARY_CHARS - 1] + "…"


def render_step(step: TrajectoryStep) -> str:
    return (
        f"{step.index}. OBS {summarize_observation(step.observation)}"
        f" | ACT {step.action} | FB {step.feedback}"
    )


def render_trajectory(steps: Trajectory) -> str:
    """One line per step; empty trajectories render an explicit marker."""
    if not steps:
        return "(no steps taken)"
    return "\n".join(render_step(step) for step in steps)


def action_sequence(steps: Trajectory) -> str:
    if not steps:
        return "(none)"
    return ", ".join(step.action for step in steps)
