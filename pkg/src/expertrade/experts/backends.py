"""Pluggable answer backends: offline mocks, scripted replay and a remote chat endpoint."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

from ..market_data import MovementLabel
from .schema import (
    DISPLAY_NAMES,
    ExpertKind,
    FiveClassLabel,
    PromptBundle,
    script_key,
)

log = logging.getLogger(__name__)


class BackendError(RuntimeError):
    pass


class ExpertBackend(Protocol):
    identity: str
    deterministic: bool

    def answer(self, bundle: PromptBundle) -> str: ...


# ---------------------------------------------------------------------------
# Offline mocks (invented stand-ins for fine-tuned models)

POSITIVE_WORDS = frozenset(
    "beat beats bullish gain gains growth outperform profit raised record robust strong surge upgrade upside".split()
)
NEGATIVE_WORDS = frozenset(
    "bearish cut decline downgrade downside lawsuit loss losses miss misses plunge recall slump underperform weak".split()
)
_WORD = re.compile(r"[a-z]+")


def sentiment_counts(text: str) -> tuple[int, int]:
    words = _WORD.findall(text.lower())
    return sum(w in POSITIVE_WORDS for w in words), sum(w in NEGATIVE_WORDS for w in words)


def news_mock(bundle: PromptBundle) -> str:
    text = bundle.features.get("article", bundle.prompt)
    pos, neg = sentiment_counts(text)
    label = MovementLabel.RISE if pos > neg else MovementLabel.FALL
    return (
        f"Reasoning: The article contains {pos} positive and {neg} negative cues.\n"
        f"Prediction: {label.value}"
    )


def market_mock(bundle: PromptBundle) -> str:
    momentum = float(bundle.features.get("momentum_5d", 0.0))
    label = MovementLabel.RISE if momentum > 0 else MovementLabel.FALL
    return f"Prediction: {label.value}"


def alpha_mock(bundle: PromptBundle) -> str:
    score = float(bundle.features.get("score", 0.0))
    label = MovementLabel.RISE if score > 0 else MovementLabel.FALL
    return f"Prediction: {label.value}"


def eps_growth_class(growth: float) -> FiveClassLabel:
    if growth > 0.10:
        return FiveClassLabel.STRONG_RISE
    if growth > 0.02:
        return FiveClassLabel.MODERATE_RISE
    if growth >= -0.02:
        return FiveClassLabel.NO_CHANGE
    if growth >= -0.10:
        return FiveClassLabel.MODERATE_FALL
    return FiveClassLabel.STRONG_FALL


def fundamental_mock(bundle: PromptBundle) -> str:
    growth = float(bundle.features.get("eps_growth", 0.0))
    label = eps_growth_class(growth)
    return (
        f"Reasoning: Year-over-year EPS growth is {growth:+.1%}.\n"
        f"Prediction: {label.value}"
    )


_NAME_TO_KIND = {name: kind for kind, name in DISPLAY_NAMES.items() if kind.value in ("news", "market", "alpha", "fundamental")}
_DIGEST = re.compile(r"^Input from (.+?):$|^- Prediction: (.+)$", re.MULTILINE)
_DIRECTION = {
    "rise": 1,
    "fall": -1,
    "strong rise": 1,
    "moderate rise": 1,
    "no change": 0,
    "moderate fall": -1,
    "strong fall": -1,
}


def digest_votes(summary_text: str) -> dict[ExpertKind, int]:
    """+1 / -1 / 0 direction per specialist found in a summarized report."""
    votes: dict[ExpertKind, int] = {}
    current: ExpertKind | None = None
    for m in _DIGEST.finditer(summary_text):
        if m.group(1) is not None:
            current = _NAME_TO_KIND.get(m.group(1))
        elif current is not None:
            votes[current] = _DIRECTION.get(m.group(2).strip().lower(), 0)
    return votes


def majority(votes: Mapping[ExpertKind, int]) -> int:
    """Sign of the vote total; the market vote breaks ties, otherwise Fall."""
    total = sum(votes.values())
    if total:
        return 1 if total > 0 else -1
    market = votes.get(ExpertKind.MARKET, 0)
    return market if market else -1


def general_predict_mock(bundle: PromptBundle) -> str:
    votes = digest_votes(bundle.prompt)
    up = sum(v > 0 for v in votes.values())
    down = sum(v < 0 for v in votes.values())
    label = MovementLabel.RISE if majority(votes) > 0 else MovementLabel.FALL
    return (
        f"Reasoning: {up} of {len(votes)} experts expect a rise and {down} expect a fall.\n"
        f"Prediction: {label.value}"
    )


_SECTION = re.compile(r"^Summarized Report for Stock (\S+):$", re.MULTILINE)


def split_compare_prompt(prompt: str) -> list[tuple[str, str]]:
    parts = _SECTION.split(prompt)
    # parts = [preamble, ticker_a, body_a, ticker_b, body_b]
    return [(parts[i], parts[i + 1]) for i in range(1, len(parts) - 1, 2)]


def general_compare_mock(bundle: PromptBundle) -> str:
    sections = split_compare_prompt(bundle.prompt)
    if len(sections) != 2:
        return "Unable to compare."
    (ta, body_a), (tb, body_b) = sections
    va, vb = digest_votes(body_a), digest_votes(body_b)
    key_a = (sum(va.values()), va.get(ExpertKind.MARKET, 0))
    key_b = (sum(vb.values()), vb.get(ExpertKind.MARKET, 0))
    return f"Stock {ta if key_a >= key_b else tb}"


MOCK_HANDLERS: dict[ExpertKind, Callable[[PromptBundle], str]] = {
    ExpertKind.NEWS: news_mock,
    ExpertKind.MARKET: market_mock,
    ExpertKind.ALPHA: alpha_mock,
    ExpertKind.FUNDAMENTAL: fundamental_mock,
    ExpertKind.GENERAL_PREDICT: general_predict_mock,
    ExpertKind.GENERAL_COMPARE: general_compare_mock,
}


class MockBackend:
    """Rule-based stand-in for every expert; pure function of the bundle."""

    identity = "mock"
    deterministic = True

    def answer(self, bundle: PromptBundle) -> str:
        return MOCK_HANDLERS[bundle.kind](bundle)


class LatentScoreMock:
    """Comparison backend that prefers the ticker with the higher latent score (ties: first)."""

    identity = "latent-score-mock"
    deterministic = True

    def __init__(self, scores: Mapping[str, float]):
        self.scores = dict(scores)

    def answer(self, bundle: PromptBundle) -> str:
        a, b = bundle.features["ticker_a"], bundle.features["ticker_b"]
        return f"Stock {a if self.scores[a] >= self.scores[b] else b}"


# ---------------------------------------------------------------------------
# Scripted replay


class ScriptedBackend:
    """Replays recorded responses keyed by (expert kind, ticker, date).

    Comparison bundles use ``"A|B"`` as the ticker.
    """

    deterministic = True

    def __init__(self, records: Iterable[Mapping[str, Any]], identity: str = "scripted"):
        self.identity = identity
        self.responses: dict[str, str] = {}
        for rec in records:
            key = script_key(rec["kind"], rec["ticker"], rec["date"])
            self.responses[key] = rec["response"]

    @classmethod
    def from_jsonl(cls, path: str | Path) -> ScriptedBackend:
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                missing = {"kind", "ticker", "date", "response"} - rec.keys()
                if missing:
                    raise ValueError(f"{path}:{lineno}: missing keys {sorted(missing)}")
                records.append(rec)
        return cls(records, identity=f"scripted:{Path(path).name}")

    def answer(self, bundle: PromptBundle) -> str:
        try:
            return self.responses[bundle.script_key()]
        except KeyError:
            date = bundle.date.isoformat() if bundle.date else ""
            raise BackendError(
                f"no scripted response for ({bundle.kind.value}, {bundle.ticker}, {date})"
            ) from None


# ---------------------------------------------------------------------------
# Remote chat-completion endpoint


@dataclass(frozen=True)
class RemoteConfig:
    url: str
    model: str
    response_path: str = "choices.0.message.content"
    auth_header: str | None = "Authorization"
    auth_env: str | None = "EXPERTRADE_API_KEY"
    auth_prefix: str = "Bearer "
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_max: float = 8.0
    max_in_flight: int = 4


def extract_path(payload: Any, path: str) -> Any:
    node = payload
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict):
            node = node[part]
        else:
            raise KeyError(part)
    return node


RETRY_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class RemoteBackend:
    """One POST per prompt: system message = instruction, user message = prompt.

    Transport errors and retryable statuses are retried with exponential
    backoff; concurrent requests are capped by ``max_in_flight``.
    """

    deterministic = False

    def __init__(
        self,
        config: RemoteConfig,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.identity = f"remote:{config.model}"
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def headers(self) -> dict[str, str]:
        cfg = self.config
        if not cfg.auth_header or not cfg.auth_env:
            return {}
        secret = os.environ.get(cfg.auth_env)
        if not secret:
            return {}
        return {cfg.auth_header: f"{cfg.auth_prefix}{secret}"}

    def request_body(self, bundle: PromptBundle) -> dict[str, Any]:
        return {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": bundle.instruction},
                {"role": "user", "content": bundle.prompt},
            ],
        }

    def backoff(self, attempt: int) -> float:
        return min(self.config.backoff_max, self.config.backoff_base * (2**attempt))

    def answer(self, bundle: PromptBundle) -> str:
        body = self.request_body(bundle)
        last_error = "no attempt made"
        with self._slots:
            for attempt in range(self.config.max_retries + 1):
                if attempt:
                    self._sleep(self.backoff(attempt - 1))
                try:
                    resp = self._client.post(
                        self.config.url, json=body, headers=self.headers(), timeout=self.config.timeout
                    )
                except httpx.TransportError as exc:
                    last_error = f"transport error: {exc}"
                    log.warning("remote attempt %d failed: %s", attempt + 1, last_error)
                    continue
                if resp.status_code in RETRY_STATUS:
                    last_error = f"HTTP {resp.status_code}"
                    log.warning("remote attempt %d failed: %s", attempt + 1, last_error)
                    continue
                if resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    text = extract_path(resp.json(), self.config.response_path)
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise BackendError(
                        f"response has no value at {self.config.response_path!r}: {exc}"
                    ) from None
                if not isinstance(text, str):
                    raise BackendError(f"value at {self.config.response_path!r} is not a string")
                return text
        raise BackendError(f"giving up after {self.config.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()
