"""Shared HTTP plumbing for the remote chat and embeddings clients."""

from __future__ import annotations

import json
import time
from typing import Callable

import requests

RETRY_DELAYS = (0.5, 1.0, 2.0)


class TransportError(RuntimeError):
    """Endpoint unreachable or persistently failing after retries."""


def canonical_body(payload: dict) -> bytes:
    """Serialize a request body deterministically (sorted keys, no whitespace)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def post_json(
    url: str,
    payload: dict,
    *,
    api_key: str = "",
    timeout: float = 120.0,
    sleep: Callable[[float], None] | None = None,
) -> dict:
    """POST a JSON payload, retrying up to 3 times with 0.5/1/2 s backoff.

    Returns the decoded JSON reply on a 2xx response; raises TransportError
    once the retry budget is exhausted.
    """
    wait = sleep if sleep is not None else time.sleep
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = canonical_body(payload)
    last_error: str = ""
    for attempt in range(len(RETRY_DELAYS) + 1):
        try:
            response = requests.post(url, data=body, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
        else:
            if 200 <= response.status_code < 300:
                # requests raises a RequestException subclass here too, so the
                # decode must sit outside the transport handler: a garbled 2xx
                # body is a contract violation, not a retryable outage.
                try:
                    return response.json()
                except ValueError as exc:
                    raise TransportError(f"invalid JSON from {url}: {exc}") from exc
            last_error = f"HTTP {response.status_code}"
        if attempt < len(RETRY_DELAYS):
            wait(RETRY_DELAYS[attempt])
    raise TransportError(f"POST {url} failed after {len(RETRY_DELAYS) + 1} attempts: {last_error}")
