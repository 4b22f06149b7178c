"""Binary classification metrics (Rise is the positive class)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .market_data import MovementLabel


class EmptyMatrix(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _require(cm: ConfusionMatrix) -> None:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no observations")


def accuracy(cm: ConfusionMatrix) -> float:
    _require(cm)
    return (cm.tp + cm.tn) / cm.total


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0 when any marginal is empty."""
    _require(cm)
    denom = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def score_predictions(labels: Sequence[MovementLabel], predictions: Sequence[MovementLabel]) -> ConfusionMatrix:
    if len(labels) != len(predictions):
        raise ValueError(f"{len(labels)} labels vs {len(predictions)} predictions")
    tp = tn = fp = fn = 0
    for y, p in zip(labels, predictions):
        y, p = MovementLabel(y), MovementLabel(p)
        if p is MovementLabel.RISE:
            tp += y is MovementLabel.RISE
            fp += y is MovementLabel.FALL
        else:
            tn += y is MovementLabel.FALL
            fn += y is MovementLabel.RISE
    return ConfusionMatrix(tp, tn, fp, fn)


def metrics_report(cm: ConfusionMatrix) -> dict:
    return {"accuracy": accuracy(cm), "mcc": mcc(cm), "counts": asdict(cm)}


def write_metrics_json(cm: ConfusionMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(metrics_report(cm), indent=2, sort_keys=True) + "\n", encoding="utf-8")
