"""Prompt templates, shipped as text assets and rendered with string.Template.

Templates live in the packaged prompts/ directory; a library constructed
with an override directory prefers same-named files there, which is how
deployments swap prompt wording without forking code. Rendering is strict:
a missing placeholder raises instead of silently leaving a hole.
"""

from __future__ import annotations

import string
from importlib import resources
from pathlib import Path

PROMPT_NAMES = (
    "coarse_plan",
    "act_system",
    "act_user",
    "reflect_success",
    "reflect_failure",
    "reflect_comparative",
    "consolidate",
)

CORRECTIVE_SUFFIX = (
    "Your previous reply could not be parsed. Reply again with only a single "
    "valid JSON object in the requested format and no surrounding text."
)


class PromptLibrary:
    """Loads named templates from package data, optionally shadowed by a directory."""

    def __init__(self, override_dir: str | Path | None = None) -> None:
        self.override_dir = Path(override_dir) if override_dir is not None else None
        self._cache: dict[str, string.Template] = {}

    def text(self, name: str) -> str:
        if name not in PROMPT_NAMES:
            raise KeyError(f"unknown prompt {name!r}; expected one of {PROMPT_NAMES}")
        if self.override_dir is not None:
            candidate = self.override_dir / f"{name}.txt"
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8")
        return (
            resources.files("elite")
            .joinpath("prompts", f"{name}.txt")
            .read_text(encoding="utf-8")
        )

    def render(self, name: str, **variables: str) -> str:
        if name not in self._cache:
            self._cache[name] = string.Template(self.text(name))
        return self._cache[name].substitute(**variables)


DEFAULT_LIBRARY = PromptLibrary()
