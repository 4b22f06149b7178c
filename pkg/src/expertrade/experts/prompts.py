"""Instruction/prompt templates for the four specialists and the General Expert."""

from __future__ import annotations

import datetime as dt
from typing import Any, Mapping, Sequence

from ..alpha.factors import AlphaRecord
from .schema import ExpertKind, PromptBundle


class EmptyArticle(ValueError):
    pass


class EmptyFactorList(ValueError):
    pass


NEWS_INSTRUCTION = (
    "You are provided with a news article. Please predict how the stock will perform in the next "
    '{D} days. Your response should include your reasoning followed by a prediction of "Rise" or '
    '"Fall" in the specified format.\n'
    "\n"
    "Format your response as follows:\n"
    "Reasoning: [Your reasoning here]\n"
    "Prediction: [Rise or Fall]"
)
NEWS_PROMPT = (
    "News Article:\n"
    "{article}\n"
    "\n"
    "Question: Given the information in the news article above, how is the stock expected to "
    "perform in the next {D} days?"
)

MARKET_INSTRUCTION = (
    "You are provided with historical OHLCV data of the past {T} days and a description of its "
    "statistics. Please predict how the stock will perform the next {D} day. Your response should "
    'be "Rise" or "Fall".'
)
MARKET_PROMPT = (
    "{embedding}\n"
    "\n"
    "Statistics: {stats}\n"
    "\n"
    "Question: Given the reprogrammed OHLCV data and its statistics, how is the stock expected to "
    "perform in the next {D} days?"
)

ALPHA_INSTRUCTION = (
    "You are provided with alpha factors derived from OHLCV data. Please predict the stock's "
    "movement based on the top contributing alpha factors. Your response should be "
    '"Rise" or "Fall".'
)
ALPHA_PROMPT = (
    "Alpha Factors:\n"
    "{factors}\n"
    "\n"
    "Descriptions: {descriptions}\n"
    "\n"
    "Question: Based on the provided alpha factors, how is the stock expected to perform in the "
    "next {D} days?"
)

FUNDAMENTAL_INSTRUCTION = (
    "You are provided with a summarized report of the stock's earnings call transcripts and "
    "fundamental metrics. Please predict whether the stock will rise or fall in the next quarter. "
    "Your response should include a prediction in one of the following five categories: "
    '"Strong Rise," "Moderate Rise," "No Change," "Moderate Fall," or "Strong Fall," followed by '
    "reasoning."
)
FUNDAMENTAL_PROMPT = (
    "Summarized Report:\n"
    "{report}\n"
    "\n"
    "Question: Based on the fundamental information, will the stock rise or fall in the next quarter?"
)

GENERAL_PREDICT_INSTRUCTION = (
    "You are provided with a summarized report of the stock. Please predict whether the stock will "
    "rise or fall the next {D} day.\n"
    "\n"
    "Format your response as follows: Reasoning: [Your reasoning here] Prediction: [Rise or Fall]."
)
GENERAL_PREDICT_PROMPT = (
    "Summarized Report:\n"
    "{report}\n"
    "\n"
    "Question: Based on the summarized report, will the stock rise or fall in the next {D} days?"
)

# Alternate wording used by the fine-tuning templates of the General Expert.
GENERAL_PREDICT_INSTRUCTION_ALT = (
    "You are provided with a summarized report of the stock. Please predict whether the stock will "
    "rise or fall in the next {D} day."
)

GENERAL_COMPARE_INSTRUCTION = (
    "You are provided with summarized reports of two stocks. Please determine which stock will "
    "perform better the next {D} day. Please output Stock {A} or Stock {B}."
)
GENERAL_COMPARE_PROMPT = (
    "Summarized Report for Stock {A}:\n"
    "{report_a}\n"
    "\n"
    "Summarized Report for Stock {B}:\n"
    "{report_b}\n"
    "\n"
    "Question: Based on the summarized reports, which stock will perform better in the next {D} days?"
)
GENERAL_COMPARE_INSTRUCTION_ALT = (
    "You are provided with summarized reports of two stocks. Please determine which stock will "
    'perform better in the next {D} day. Please output "Stock {A}" or "Stock {B}".'
)
VARIANTS = ("default", "alt")


def _variant(name: str) -> bool:
    if name not in VARIANTS:
        raise ValueError(f"unknown template variant {name!r}")
    return name == "alt"


def build_news_prompt(
    article_text: str,
    horizon_days: int = 1,
    *,
    ticker: str = "",
    date: dt.date | None = None,
) -> PromptBundle:
    if not article_text.strip():
        raise EmptyArticle("news article is empty")
    return PromptBundle(
        ExpertKind.NEWS,
        NEWS_INSTRUCTION.format(D=horizon_days),
        NEWS_PROMPT.format(article=article_text, D=horizon_days),
        horizon_days,
        ticker=ticker,
        date=date,
        features={"article": article_text},
    )


def build_market_prompt(
    embedding_ref: str,
    stats_text: str,
    horizon_days: int = 1,
    *,
    window: int = 20,
    ticker: str = "",
    date: dt.date | None = None,
    features: Mapping[str, Any] | None = None,
) -> PromptBundle:
    """The embedding itself cannot travel through a text prompt; ``embedding_ref``
    is the placeholder token standing in for it."""
    if not embedding_ref.strip() or not stats_text.strip():
        raise ValueError("embedding reference and statistics text are required")
    return PromptBundle(
        ExpertKind.MARKET,
        MARKET_INSTRUCTION.format(T=window, D=horizon_days),
        MARKET_PROMPT.format(embedding=embedding_ref, stats=stats_text, D=horizon_days),
        horizon_days,
        ticker=ticker,
        date=date,
        attachment=embedding_ref,
        features=dict(features or {}),
    )


def format_score(value: float) -> str:
    return f"{value:.2f}"


def build_alpha_prompt(
    topk: Sequence[tuple[AlphaRecord, float, float]],
    score: float,
    horizon_days: int = 1,
    *,
    combiner_name: str = "a linear z-score model",
    show_values: bool = True,
    ticker: str = "",
    date: dt.date | None = None,
) -> PromptBundle:
    """``topk`` holds (record, factor value, contribution), already in contribution order."""
    if not topk:
        raise EmptyFactorList("at least one contributing factor is required")
    factor_lines = []
    desc_lines = []
    for rec, value, _ in topk:
        line = f"ID {rec.id}: {rec.source_text}"
        if show_values:
            line += f" (value: {value:.4f})"
        factor_lines.append(line)
        desc_lines.append(f"- ID {rec.id}: {rec.description}")
    return PromptBundle(
        ExpertKind.ALPHA,
        ALPHA_INSTRUCTION,
        ALPHA_PROMPT.format(
            factors="\n".join(factor_lines),
            descriptions="\n" + "\n".join(desc_lines)
            + f"\n\nThe comprehensive score derived from {combiner_name} is: {format_score(score)}",
            D=horizon_days,
        ),
        horizon_days,
        ticker=ticker,
        date=date,
        features={"score": float(score), "alpha_ids": [rec.id for rec, _, _ in topk]},
    )


def build_fundamental_prompt(
    transcript_summary: str,
    metrics: Sequence[tuple[str, Any]] | Mapping[str, Any] = (),
    *,
    ticker: str = "",
    date: dt.date | None = None,
    features: Mapping[str, Any] | None = None,
) -> PromptBundle:
    """Fundamental predictions cover the next quarter, so there is no day horizon slot."""
    if not transcript_summary.strip():
        raise ValueError("transcript summary is empty")
    items = list(metrics.items()) if isinstance(metrics, Mapping) else list(metrics)
    report = transcript_summary.strip()
    if items:
        report += "\n\nFundamental Metrics:\n" + "\n".join(f"{k}: {v}" for k, v in items)
    return PromptBundle(
        ExpertKind.FUNDAMENTAL,
        FUNDAMENTAL_INSTRUCTION,
        FUNDAMENTAL_PROMPT.format(report=report),
        1,
        ticker=ticker,
        date=date,
        features=dict(features or {}),
    )


def build_general_predict_prompt(
    summary_text: str,
    horizon_days: int = 1,
    *,
    ticker: str = "",
    date: dt.date | None = None,
    variant: str = "default",
) -> PromptBundle:
    instruction = GENERAL_PREDICT_INSTRUCTION_ALT if _variant(variant) else GENERAL_PREDICT_INSTRUCTION
    return PromptBundle(
        ExpertKind.GENERAL_PREDICT,
        instruction.format(D=horizon_days),
        GENERAL_PREDICT_PROMPT.format(report=summary_text, D=horizon_days),
        horizon_days,
        ticker=ticker,
        date=date,
    )


def build_general_compare_prompt(
    ticker_a: str,
    summary_a: str,
    ticker_b: str,
    summary_b: str,
    horizon_days: int = 1,
    *,
    date: dt.date | None = None,
    variant: str = "default",
) -> PromptBundle:
    instruction = GENERAL_COMPARE_INSTRUCTION_ALT if _variant(variant) else GENERAL_COMPARE_INSTRUCTION
    return PromptBundle(
        ExpertKind.GENERAL_COMPARE,
        instruction.format(D=horizon_days, A=ticker_a, B=ticker_b),
        GENERAL_COMPARE_PROMPT.format(
            A=ticker_a, B=ticker_b, report_a=summary_a, report_b=summary_b, D=horizon_days
        ),
        horizon_days,
        ticker=f"{ticker_a}|{ticker_b}",
        date=date,
        features={"ticker_a": ticker_a, "ticker_b": ticker_b},
    )
