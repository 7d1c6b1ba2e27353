"""JSON-over-HTTP POST with retries and exponential backoff."""

from __future__ import annotations

import time

import requests

from .errors import RemoteServiceError

# Sleep before retry k (1-based) is BACKOFF_BASE_SECONDS * 2**(k-1).
# Tests shrink this to keep retry paths fast.
BACKOFF_BASE_SECONDS = 0.5


def post_json(
    url: str,
    payload: dict,
    *,
    headers: dict[str, str] | None = None,
    timeout: float = 30.0,
    max_retries: int = 2,
) -> dict:
    """POST ``payload`` as JSON and return the decoded JSON response body.

    Connection failures, non-2xx statuses and undecodable bodies are retried
    up to ``max_retries`` extra attempts with exponential backoff, then raise
    :class:`RemoteServiceError`.
    """
    last_failure = "no attempt made"
    for attempt in range(max_retries + 1):
        if attempt:
            time.sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
        try:
            response = requests.post(url, json=payload, headers=headers or {}, timeout=timeout)
        except requests.RequestException as exc:
            last_failure = f"request failed: {exc}"
            continue
        if not 200 <= response.status_code < 300:
            last_failure = f"HTTP {response.status_code}"
            continue
        try:
            body = response.json()
        except ValueError:
            last_failure = "response body is not JSON"
            continue
        if not isinstance(body, dict):
            last_failure = "response body is not a JSON object"
            continue
        return body
    raise RemoteServiceError(
        f"POST {url} failed after {max_retries + 1} attempt(s): {last_failure}"
    )
