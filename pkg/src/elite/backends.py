"""Chat backends: the remote OpenAI-style client and the scripted test double.

Every language-model call in the system goes through `chat(backend, request)`,
so swapping the real service for a scripted stand-in is a constructor
argument, not a monkeypatch. The scripted backend matches ordered rules
against the last user message, which is enough to drive whole closed-loop
runs deterministically.
"""

from __future__ import annotations

import logging
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol

from elite._http import TransportError, post_json

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024
CHAT_API_KEY_ENV = "ELITE_CHAT_API_KEY"

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"role must be one of {_ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """One decoding request. Temperature defaults to 0 so replies are greedy."""

    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")

    def last_user_content(self) -> str:
        for message in reversed(self.messages):
            if message.role == "user":
                return message.content
        return ""


def request_from(system: str, user: str) -> ChatRequest:
    """The common two-message shape: one system prompt, one user prompt."""
    messages = []
    if system:
        messages.append(ChatMessage(role="system", content=system))
    messages.append(ChatMessage(role="user", content=user))
    return ChatRequest(messages=tuple(messages))


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


def chat(backend: Backend, request: ChatRequest) -> str:
    """Send one request and return the assistant reply text."""
    return backend.complete(request)


@dataclass
class ScriptRule:
    """Match the last user message by substring (or regex) and reply with fixed text."""

    pattern: str
    reply: str
    regex: bool = False
    consume: bool = False
    used: bool = field(default=False, compare=False)

    def matches(self, text: str) -> bool:
        if self.regex:
            return re.search(self.pattern, text) is not None
        return self.pattern in text


class ScriptedBackend:
    """Deterministic rule-driven backend for tests and offline runs.

    Rules are checked in order against the last user message; the first
    match wins. A consume-once rule stops matching after it fires, which is
    how scripted sessions evolve over multiple turns. No rule matching falls
    back to `default_reply`.
    """

    def __init__(self, rules: list[ScriptRule] | None = None, default_reply: str = "") -> None:
        self.rules = list(rules or [])
        self.default_reply = default_reply
        self.transcript: list[tuple[ChatRequest, str]] = []

    def add_rule(self, pattern: str, reply: str, *, regex: bool = False, consume: bool = False) -> None:
        self.rules.append(ScriptRule(pattern=pattern, reply=reply, regex=regex, consume=consume))

    def complete(self, request: ChatRequest) -> str:
        text = request.last_user_content()
        reply = self.default_reply
        for rule in self.rules:
            if rule.consume and rule.used:
                continue
            if rule.matches(text):
                rule.used = True
                reply = rule.reply
                break
        self.transcript.append((request, reply))
        return reply


class RecordingBackend:
    """Wrap another backend and keep every request/reply pair."""

    def __init__(self, inner: Backend) -> None:
        self.inner = inner
        self.transcript: list[tuple[ChatRequest, str]] = []

    def complete(self, request: ChatRequest) -> str:
        reply = self.inner.complete(request)
        self.transcript.append((request, reply))
        return reply


@dataclass(frozen=True)
class RemoteChatConfig:
    base_url: str
    model: str
    api_key: str = ""
    timeout: float = 120.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if not self.model:
            raise ValueError("model must be non-empty")
        if self.max_in_flight <= 0:
            raise ValueError(f"max_in_flight must be positive, got {self.max_in_flight}")

    def resolved_api_key(self) -> str:
        return os.environ.get(CHAT_API_KEY_ENV, "") or self.api_key


def reply_from_response(body: dict) -> str:
    """Pull the assistant text out of a chat-completions response body."""
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat response: {exc}") from exc
    if not isinstance(content, str):
        raise TransportError(f"chat content is {type(content).__name__}, expected str")
    return content


class RemoteChatBackend:
    """OpenAI-compatible chat client with bounded concurrency and retry."""

    def __init__(
        self,
        config: RemoteChatConfig,
        *,
        sleep: Callable[[float], None] | None = None,
    ) -> None:
        self.config = config
        self._sleep = sleep
        self._gate = threading.Semaphore(config.max_in_flight)

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        with self._gate:
            body = post_json(
                url,
                payload,
                api_key=self.config.resolved_api_key(),
                timeout=self.config.timeout,
                sleep=self._sleep,
            )
        return reply_from_response(body)
