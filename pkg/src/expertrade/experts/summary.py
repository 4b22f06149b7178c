"""Deterministic digest of specialist reports for the General Expert."""

from __future__ import annotations

import re
from typing import Sequence

from .schema import DISPLAY_NAMES, SPECIALISTS, ExpertReport, SummarizedReport

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
SEPARATOR = "\n\n"


def _one_line(text: str) -> str:
    return " ".join(text.split())


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_END.split(_one_line(text)) if s]


def render_digest(report: ExpertReport, reasoning: str | None) -> str:
    lines = [f"Input from {DISPLAY_NAMES[report.kind]}:"]
    if reasoning:
        lines.append(f"- Reasoning: {reasoning}")
    lines.append(f"- Prediction: {report.prediction.value}")
    return "\n".join(lines)


def _fit_reasoning(report: ExpertReport, limit: int) -> str:
    bare = render_digest(report, None)
    if len(bare) > limit:
        raise ValueError(
            f"budget of {limit} characters per expert cannot hold the {report.kind.value} header"
        )
    if not report.reasoning:
        return bare
    kept: list[str] = []
    best = bare
    for sentence in split_sentences(report.reasoning):
        candidate = render_digest(report, " ".join(kept + [sentence]))
        if len(candidate) > limit:
            break
        kept.append(sentence)
        best = candidate
    return best


def summarize_reports(reports: Sequence[ExpertReport], budget: int = 2000) -> SummarizedReport:
    """One digest per specialist in fixed order (news, market, alpha, fundamental).

    Each digest gets an equal share of ``budget`` characters; reasoning is cut
    at a sentence boundary so that the joined text never exceeds the budget.
    """
    if not reports:
        raise ValueError("at least one report is required")
    by_kind = {}
    for r in reports:
        if r.kind not in SPECIALISTS:
            raise ValueError(f"{r.kind.value} is not a specialist report")
        if r.kind in by_kind:
            raise ValueError(f"duplicate {r.kind.value} report")
        by_kind[r.kind] = r
    tickers = {(r.ticker, r.date) for r in reports}
    if len(tickers) != 1:
        raise ValueError("reports must share one (ticker, date)")
    ticker, date = next(iter(tickers))
    ordered = [by_kind[k] for k in SPECIALISTS if k in by_kind]
    per_expert = (budget - len(SEPARATOR) * (len(ordered) - 1)) // len(ordered)
    digests = tuple((r.kind, _fit_reasoning(r, per_expert)) for r in ordered)
    return SummarizedReport(ticker, date, digests, budget)
