"""Shared HTTP plumbing for the remote LLM and embedding clients.

Transient failures (connection errors, timeouts, HTTP 429 and 5xx) are
retried with exponential backoff up to a configured attempt budget.
Authentication failures and malformed payloads fail immediately.
"""

from __future__ import annotations

import os
from typing import Callable

import requests

from .errors import (
    AuthError,
    MalformedResponseError,
    MissingCredentialError,
    NetworkError,
    RateLimitedError,
)


def require_api_key(env_var: str) -> str:
    """Read the API credential from the environment, never from config."""
    key = os.environ.get(env_var, "")
    if not key:
        raise MissingCredentialError(env_var)
    return key


def post_with_retries(
    url: str,
    payload: dict,
    api_key: str,
    timeout_s: float,
    max_attempts: int,
    backoff_s: float,
    session=None,
    sleep: Callable[[float], None] | None = None,
) -> dict:
    """POST JSON and return the decoded JSON response body.

    Retries connection errors, timeouts, HTTP 429 and HTTP 5xx with delays
    of ``backoff_s * 2**attempt``.  HTTP 401/403 raise :class:`AuthError`
    without retrying; any other non-2xx status or an undecodable body
    raises :class:`MalformedResponseError`.
    """
    import time

    if session is None:
        session = requests
    if sleep is None:
        sleep = time.sleep
    headers = {
        "Authorization": f"Bearer {api_key}",
        "Content-Type": "application/json",
    }
    last_transient = ""
    saw_rate_limit = False
    for attempt in range(max_attempts):
        if attempt:
            sleep(backoff_s * 2 ** (attempt - 1))
        try:
            response = session.post(url, json=payload, headers=headers, timeout=timeout_s)
        except (requests.ConnectionError, requests.Timeout) as err:
            last_transient = f"{type(err).__name__}: {err}"
            continue
        status = int(response.status_code)
        if status in (401, 403):
            raise AuthError(status)
        if status == 429:
            saw_rate_limit = True
            last_transient = "HTTP 429"
            continue
        if 500 <= status < 600:
            last_transient = f"HTTP {status}"
            continue
        if not 200 <= status < 300:
            raise MalformedResponseError(f"unexpected HTTP status {status}")
        try:
            return response.json()
        except ValueError as err:
            raise MalformedResponseError(f"response body is not JSON: {err}") from None
    if saw_rate_limit:
        raise RateLimitedError(max_attempts)
    raise NetworkError(
        f"giving up after {max_attempts} attempts; last failure: {last_transient}"
    )
