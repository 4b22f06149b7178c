"""General Expert: binary prediction from a digest, and pairwise comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .backends import ExpertBackend
from .parsing import ResponseParseError, parse_choice, parse_response
from .prompts import build_general_compare_prompt, build_general_predict_prompt
from .schema import ComparisonChoice, ExpertKind, ExpertReport, PromptBundle, SummarizedReport

log = logging.getLogger(__name__)


def general_predict(summary: SummarizedReport, backend: ExpertBackend, horizon_days: int = 1) -> ExpertReport:
    bundle = build_general_predict_prompt(
        summary.text, horizon_days, ticker=summary.ticker, date=summary.date
    )
    raw = backend.answer(bundle)
    prediction, reasoning = parse_response(raw, ExpertKind.GENERAL_PREDICT)
    return ExpertReport(ExpertKind.GENERAL_PREDICT, summary.ticker, summary.date, prediction, reasoning, raw)


@dataclass(frozen=True)
class Comparison:
    ticker_a: str
    ticker_b: str
    choice: ComparisonChoice
    attempts: int
    fallback: bool
    raw: tuple[str, ...]
    bundle: PromptBundle | None = field(default=None, compare=False, repr=False)

    @property
    def winner(self) -> str:
        return self.ticker_a if self.choice is ComparisonChoice.STOCK_A else self.ticker_b


def general_compare(
    summary_a: SummarizedReport,
    summary_b: SummarizedReport,
    backend: ExpertBackend,
    horizon_days: int = 1,
    retries: int = 3,
) -> Comparison:
    """Ask which of two stocks does better.

    Unparseable answers are retried up to ``retries`` attempts in total; after
    that the lexicographically smaller ticker wins and the fallback is
    recorded. Backend failures propagate.
    """
    a, b = summary_a.ticker, summary_b.ticker
    if a == b:
        raise ValueError(f"cannot compare {a} with itself")
    if retries < 1:
        raise ValueError("retries must be >= 1")
    bundle = build_general_compare_prompt(a, summary_a.text, b, summary_b.text, horizon_days, date=summary_a.date)
    raws: list[str] = []
    for _ in range(retries):
        raw = backend.answer(bundle)
        raws.append(raw)
        try:
            choice = parse_choice(raw, a, b)
        except ResponseParseError as exc:
            log.debug("unparseable comparison %s vs %s: %s", a, b, exc)
            continue
        return Comparison(a, b, choice, len(raws), False, tuple(raws), bundle)
    log.warning("comparison %s vs %s fell back to ticker order after %d attempts", a, b, retries)
    choice = ComparisonChoice.STOCK_A if a < b else ComparisonChoice.STOCK_B
    return Comparison(a, b, choice, len(raws), True, tuple(raws), bundle)
