"""HTTP plumbing shared by the scorer and judge clients."""

from __future__ import annotations

import time

import requests

from .errors import TransportError

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


def post_json(
    session: requests.Session,
    url: str,
    payload: dict,
    *,
    headers: dict[str, str] | None = None,
    timeout: float = 60.0,
    retry_budget: int = 3,
    backoff_base: float = 0.5,
) -> tuple[int, bytes, int]:
    """POST a JSON payload with exponential backoff on transient failures.

    Returns ``(status, raw_body, retries_used)``. Connection errors,
    timeouts, and retryable statuses (429/5xx) are retried up to
    ``retry_budget`` times; anything else is returned to the caller to
    interpret. Exhausting the budget raises TransportError.
    """
    attempts = retry_budget + 1
    last_failure = ""
    retries = 0
    for attempt in range(attempts):
        if attempt > 0:
            time.sleep(backoff_base * (2 ** (attempt - 1)))
            retries += 1
        try:
            resp = session.post(url, json=payload, headers=headers or {}, timeout=timeout)
        except requests.RequestException as exc:
            last_failure = f"{type(exc).__name__}: {exc}"
            continue
        if resp.status_code in RETRYABLE_STATUSES:
            last_failure = f"status {resp.status_code}"
            continue
        return resp.status_code, resp.content, retries
    raise TransportError(
        f"POST {url} failed after {retries} retries (last failure: {last_failure})"
    )
