"""LLM judge client and verdict parsing.

The judge sees one prompt per example and answers in free text; the
verdict parser extracts the last standalone yes/no token. Parsing is
case-insensitive and word-bounded, so "yesterday" and "knows" never
count as answers, and a chain-of-thought reply is judged by its final
answer rather than any yes/no it reasons through on the way.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from enum import Enum

import requests

from .cache import ResponseCache, make_key
from .errors import ConfigError, JudgeError, ProtocolError
from .transport import post_json

_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


class VerdictLabel(Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True, slots=True)
class Verdict:
    raw: str
    label: VerdictLabel
    matched_token: str | None
    match_position: int | None


@dataclass(frozen=True, slots=True)
class JudgeUsage:
    prompt_tokens: int
    completion_tokens: int


@dataclass(frozen=True, slots=True)
class JudgeConfig:
    """Connection and sampling settings for one judge model."""

    model: str
    endpoint_url: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 512
    retry_budget: int = 3
    timeout: float = 60.0
    unparseable_maps_to: int = 0

    def __post_init__(self) -> None:
        if not self.model:
            raise ConfigError("judge model must be non-empty")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature!r}")
        if self.max_output_tokens < 1:
            raise ConfigError(f"max_output_tokens must be >= 1, got {self.max_output_tokens}")
        if self.retry_budget < 0:
            raise ConfigError(f"retry_budget must be >= 0, got {self.retry_budget}")
        if self.unparseable_maps_to not in (0, 1):
            raise ConfigError(
                f"unparseable_maps_to must be 0 or 1, got {self.unparseable_maps_to!r}"
            )


@dataclass(frozen=True, slots=True)
class JudgeResponse:
    text: str
    usage: JudgeUsage | None
    retries: int
    from_cache: bool


def parse_verdict(raw: str) -> Verdict:
    """Last standalone yes/no wins; none found means unparseable."""
    last = None
    for match in _YES_NO.finditer(raw):
        last = match
    if last is None:
        return Verdict(
            raw=raw, label=VerdictLabel.UNPARSEABLE, matched_token=None, match_position=None
        )
    token = last.group(1)
    label = VerdictLabel.CONSISTENT if token.lower() == "yes" else VerdictLabel.INCONSISTENT
    return Verdict(raw=raw, label=label, matched_token=token, match_position=last.start())


def to_binary(verdict: Verdict, unparseable_maps_to: int = 0) -> int:
    """Map a verdict to the binary consistency label (consistent = 1)."""
    if verdict.label is VerdictLabel.CONSISTENT:
        return 1
    if verdict.label is VerdictLabel.INCONSISTENT:
        return 0
    return unparseable_maps_to


class HttpJudge:
    """Client for a chat-completions style judge endpoint."""

    def __init__(
        self,
        *,
        token: str | None = None,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.token = token if token is not None else os.environ.get("SIFID_JUDGE_TOKEN")
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self.calls = 0

    def complete(self, prompt: str, config: JudgeConfig) -> tuple[bytes, int]:
        if not config.endpoint_url:
            raise ConfigError("judge endpoint_url is not configured")
        self.calls += 1
        url = f"{config.endpoint_url.rstrip('/')}/chat/completions"
        payload = {
            "model": config.model,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        status, body, retries = post_json(
            self.session,
            url,
            payload,
            headers=headers,
            timeout=config.timeout,
            retry_budget=config.retry_budget,
            backoff_base=self.backoff_base,
        )
        if status != 200:
            raise JudgeError(
                f"judge endpoint returned status {status}",
                status=status,
                body=body.decode("utf-8", errors="replace"),
            )
        return body, retries


class MockJudge:
    """In-process judge for tests and offline dry runs.

    Replies are chosen by the first rule whose substring occurs in the
    prompt; otherwise the default reply is used. Counts invocations so
    tests can assert a warm cache never reaches the backend.
    """

    def __init__(
        self,
        rules: list[tuple[str, str]] | None = None,
        default: str = "No",
        *,
        include_usage: bool = True,
    ) -> None:
        self.rules = list(rules or [])
        self.default = default
        self.include_usage = include_usage
        self.calls = 0
        self.prompts: list[str] = []

    def _reply(self, prompt: str) -> str:
        for needle, reply in self.rules:
            if needle in prompt:
                return reply
        return self.default

    def complete(self, prompt: str, config: JudgeConfig) -> tuple[bytes, int]:
        self.calls += 1
        self.prompts.append(prompt)
        reply = self._reply(prompt)
        body: dict = {"choices": [{"message": {"content": reply}}]}
        if self.include_usage:
            body["usage"] = {
                "prompt_tokens": len(prompt.split()),
                "completion_tokens": len(reply.split()),
            }
        raw = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return raw.encode("utf-8"), 0


def _parse_completion(raw: bytes) -> tuple[str, JudgeUsage | None]:
    text = raw.decode("utf-8", errors="replace")
    try:
        parsed = json.loads(text)
    except ValueError as exc:
        raise ProtocolError(f"judge response is not JSON: {exc}", body=text) from exc
    try:
        content = parsed["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(
            "judge response missing choices[0].message.content", body=text
        ) from exc
    if not isinstance(content, str) or not content:
        raise ProtocolError("judge returned an empty completion", body=text)

    usage = None
    raw_usage = parsed.get("usage")
    if isinstance(raw_usage, dict):
        pt = raw_usage.get("prompt_tokens")
        ct = raw_usage.get("completion_tokens")
        if isinstance(pt, int) and isinstance(ct, int) and pt >= 0 and ct >= 0:
            usage = JudgeUsage(prompt_tokens=pt, completion_tokens=ct)
    return content, usage


def query_judge(
    prompt: str,
    config: JudgeConfig,
    backend: object,
    cache: ResponseCache | None = None,
) -> JudgeResponse:
    """Fetch one completion, consulting the cache first.

    Cache keys cover everything that shapes the completion: model,
    temperature, token limit, and the prompt itself. Raw response
    bodies are cached only after they parse cleanly, so a malformed
    reply is retried on the next run instead of being pinned.
    """
    key = make_key(
        "judge",
        {
            "model": config.model,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "prompt": prompt,
        },
    )
    if cache is not None:
        raw = cache.get(key)
        if raw is not None:
            content, usage = _parse_completion(raw)
            return JudgeResponse(text=content, usage=usage, retries=0, from_cache=True)

    raw, retries = backend.complete(prompt, config)
    content, usage = _parse_completion(raw)
    if cache is not None:
        cache.put(key, raw)
    return JudgeResponse(text=content, usage=usage, retries=retries, from_cache=False)
