"""Turn raw model text into structured predictions."""

from __future__ import annotations

import re

from ..market_data import MovementLabel
from .schema import ComparisonChoice, ExpertKind, FiveClassLabel, Prediction


class ResponseParseError(ValueError):
    pass


class MissingPrediction(ResponseParseError):
    pass


class UnknownLabel(ResponseParseError):
    def __init__(self, token: str, kind: ExpertKind | str):
        label = kind.value if isinstance(kind, ExpertKind) else kind
        super().__init__(f"unrecognized {label} label {token!r}")
        self.token = token


_PREDICTION = re.compile(r"Prediction\s*:[ \t]*([^\n]*)", re.IGNORECASE)
_REASONING = re.compile(r"Reasoning\s*:", re.IGNORECASE)
_CHOICE = re.compile(r"Stock\s+([A-Za-z0-9._\-]+)", re.IGNORECASE)

_BINARY = {"rise": MovementLabel.RISE, "fall": MovementLabel.FALL}
_FIVE = {label.value.lower(): label for label in FiveClassLabel}


def _normalize(token: str) -> str:
    token = re.sub(r"[^A-Za-z ]+", " ", token)
    return " ".join(token.lower().split())


def _match_label(token: str, kind: ExpertKind) -> Prediction:
    norm = _normalize(token)
    table: dict[str, Prediction]
    table = dict(_FIVE) if kind is ExpertKind.FUNDAMENTAL else dict(_BINARY)
    if norm in table:
        return table[norm]
    # tolerate trailing commentary such as "Rise (high confidence)"
    for name in sorted(table, key=len, reverse=True):
        if norm.startswith(name + " "):
            return table[name]
    raise UnknownLabel(token.strip(), kind)


def parse_response(raw: str, kind: ExpertKind) -> tuple[Prediction, str | None]:
    """Extract (prediction, reasoning) from a Reasoning/Prediction formatted reply.

    The last ``Prediction:`` wins. Reasoning is the text after the last
    ``Reasoning:`` up to the next ``Prediction:`` (or the end).
    """
    if kind is ExpertKind.GENERAL_COMPARE:
        raise ValueError("use parse_choice for comparison responses")
    matches = list(_PREDICTION.finditer(raw))
    if not matches:
        raise MissingPrediction(f"no 'Prediction:' found in {kind.value} response")
    token = matches[-1].group(1)
    if not token.strip():
        raise MissingPrediction(f"empty prediction in {kind.value} response")
    prediction = _match_label(token, kind)

    reasoning = None
    reasons = list(_REASONING.finditer(raw))
    if reasons:
        start = reasons[-1].end()
        nxt = _PREDICTION.search(raw, start)
        body = raw[start : nxt.start() if nxt else len(raw)].strip()
        reasoning = body or None
    return prediction, reasoning


def render_response(prediction: Prediction, reasoning: str | None = None) -> str:
    lines = []
    if reasoning:
        lines.append(f"Reasoning: {reasoning}")
    lines.append(f"Prediction: {prediction.value}")
    return "\n".join(lines)


def parse_choice(raw: str, ticker_a: str, ticker_b: str) -> ComparisonChoice:
    """Map the last ``Stock <ticker>`` mention onto StockA / StockB."""
    matches = [m.group(1).rstrip(".,;:").upper() for m in _CHOICE.finditer(raw)]
    if not matches:
        raise MissingPrediction("no 'Stock <ticker>' answer found")
    token = matches[-1]
    if token == ticker_a.upper():
        return ComparisonChoice.STOCK_A
    if token == ticker_b.upper():
        return ComparisonChoice.STOCK_B
    raise UnknownLabel(f"Stock {token}", ExpertKind.GENERAL_COMPARE)
