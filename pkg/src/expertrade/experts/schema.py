"""Prompt bundles, labels and report records shared by every expert."""

from __future__ import annotations

import datetime as dt
import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

from ..market_data import MovementLabel


class ExpertKind(str, enum.Enum):
    NEWS = "news"
    MARKET = "market"
    ALPHA = "alpha"
    FUNDAMENTAL = "fundamental"
    GENERAL_PREDICT = "general_predict"
    GENERAL_COMPARE = "general_compare"


# fixed fan-out / digest order
SPECIALISTS = (ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.FUNDAMENTAL)

DISPLAY_NAMES = {
    ExpertKind.NEWS: "News Analyst",
    ExpertKind.MARKET: "Market Analyst",
    ExpertKind.ALPHA: "Alpha Expert",
    ExpertKind.FUNDAMENTAL: "Fundamental Analyst",
    ExpertKind.GENERAL_PREDICT: "General Expert",
    ExpertKind.GENERAL_COMPARE: "General Expert",
}


class FiveClassLabel(str, enum.Enum):
    STRONG_RISE = "Strong Rise"
    MODERATE_RISE = "Moderate Rise"
    NO_CHANGE = "No Change"
    MODERATE_FALL = "Moderate Fall"
    STRONG_FALL = "Strong Fall"

    def direction(self) -> MovementLabel | None:
        """Binary view used for voting; No Change abstains."""
        if self in (FiveClassLabel.STRONG_RISE, FiveClassLabel.MODERATE_RISE):
            return MovementLabel.RISE
        if self in (FiveClassLabel.STRONG_FALL, FiveClassLabel.MODERATE_FALL):
            return MovementLabel.FALL
        return None


class ComparisonChoice(str, enum.Enum):
    STOCK_A = "StockA"
    STOCK_B = "StockB"


Prediction = Union[MovementLabel, FiveClassLabel, ComparisonChoice]


def binary_direction(prediction: Prediction) -> MovementLabel | None:
    if isinstance(prediction, MovementLabel):
        return prediction
    if isinstance(prediction, FiveClassLabel):
        return prediction.direction()
    return None


@dataclass(frozen=True)
class PromptBundle:
    """One prompt ready for a backend.

    ``features`` carries structured inputs for offline mock backends; it is not
    part of the prompt identity.
    """

    kind: ExpertKind
    instruction: str
    prompt: str
    horizon_days: int
    ticker: str = ""
    date: dt.date | None = None
    attachment: str | None = None
    features: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.instruction.strip() or not self.prompt.strip():
            raise ValueError("instruction and prompt must be non-empty")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be >= 1")

    def digest(self) -> str:
        payload = json.dumps(
            [self.kind.value, self.instruction, self.prompt, self.attachment], ensure_ascii=False
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def script_key(self) -> str:
        return script_key(self.kind, self.ticker, self.date)


def script_key(kind: ExpertKind | str, ticker: str, date: dt.date | str | None) -> str:
    kind_value = kind.value if isinstance(kind, ExpertKind) else str(kind)
    date_text = date.isoformat() if isinstance(date, dt.date) else (date or "")
    return hashlib.sha256(f"{kind_value}|{ticker}|{date_text}".encode("utf-8")).hexdigest()


_BINARY_KINDS = (ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.GENERAL_PREDICT)


@dataclass(frozen=True)
class ExpertReport:
    kind: ExpertKind
    ticker: str
    date: dt.date
    prediction: Prediction
    reasoning: str | None
    raw_response: str

    def __post_init__(self) -> None:
        if self.kind in _BINARY_KINDS:
            ok = isinstance(self.prediction, MovementLabel)
        elif self.kind is ExpertKind.FUNDAMENTAL:
            ok = isinstance(self.prediction, FiveClassLabel)
        else:
            ok = isinstance(self.prediction, ComparisonChoice)
        if not ok:
            raise TypeError(f"{self.kind.value} report cannot carry prediction {self.prediction!r}")


@dataclass(frozen=True)
class SummarizedReport:
    ticker: str
    date: dt.date
    digests: tuple[tuple[ExpertKind, str], ...]
    budget: int

    @property
    def text(self) -> str:
        return "\n\n".join(d for _, d in self.digests)

    @property
    def kinds(self) -> tuple[ExpertKind, ...]:
        return tuple(k for k, _ in self.digests)

    def digest_for(self, kind: ExpertKind) -> str | None:
        return dict(self.digests).get(kind)
