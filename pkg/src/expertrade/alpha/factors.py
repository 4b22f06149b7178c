"""Alpha records, factor matrices, score combination and contributor selection."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from ..market_data import OhlcvPanel
from .evaluate import InsufficientHistory, evaluate_panel
from .expr import Expr, lookback, parse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaRecord:
    id: int
    expression: Expr
    source_text: str
    description: str

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError(f"alpha {self.id}: description must be non-empty")
        if parse(self.source_text) != self.expression:
            raise ValueError(f"alpha {self.id}: source text does not match expression")

    @classmethod
    def from_text(cls, id: int, text: str, description: str | None = None) -> AlphaRecord:
        from .describe import describe_expr

        expr = parse(text)
        return cls(id, expr, text, description or describe_expr(expr))


def load_library(path: str | Path) -> list[AlphaRecord]:
    """Read ``id<TAB>expression[<TAB>description]`` lines; '#' starts a comment line."""
    records: list[AlphaRecord] = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
            try:
                alpha_id = int(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad alpha id {parts[0]!r}") from None
            if alpha_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate alpha id {alpha_id}")
            seen.add(alpha_id)
            desc = parts[2].strip() if len(parts) == 3 else None
            records.append(AlphaRecord.from_text(alpha_id, parts[1].strip(), desc))
    return records


def bundled_library_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "alphas.tsv"


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """values[d, n, f] for dates x tickers x alpha ids."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    alpha_ids: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        expected = (len(self.dates), len(self.tickers), len(self.alpha_ids))
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def at(self, date: dt.date) -> FactorSlice:
        d = self.dates.index(date)
        return FactorSlice(date, self.tickers, self.alpha_ids, self.values[d])

    def to_csv(self, path: str | Path) -> None:
        """Long form: date,ticker,alpha_id,value (NaN written as empty)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "ticker", "alpha_id", "value"])
            for d, date in enumerate(self.dates):
                for n, t in enumerate(self.tickers):
                    for f, a in enumerate(self.alpha_ids):
                        v = self.values[d, n, f]
                        w.writerow([date.isoformat(), t, a, "" if np.isnan(v) else repr(float(v))])


@dataclass(frozen=True, eq=False)
class FactorSlice:
    date: dt.date | None
    tickers: tuple[str, ...]
    alpha_ids: tuple[int, ...]
    values: np.ndarray  # (tickers, alphas)


def evaluate_library(library: Sequence[AlphaRecord], panel: OhlcvPanel) -> np.ndarray:
    """Full-history (dates, tickers, alphas) array for every record."""
    out = np.empty((len(panel.dates), len(panel.tickers), len(library)))
    for f, rec in enumerate(library):
        need = lookback(rec.expression) + 1
        if need > len(panel.dates):
            raise InsufficientHistory(need, len(panel.dates), f"alpha {rec.id}")
        out[:, :, f] = evaluate_panel(rec.expression, panel)
    return out


def build_factor_matrix(
    library: Sequence[AlphaRecord], panel: OhlcvPanel, dates: Iterable[dt.date] | None = None
) -> FactorMatrix:
    """Evaluate every alpha on every requested date.

    Dates inside a factor's warm-up window hold NaN; a factor whose window is
    longer than the whole panel raises InsufficientHistory.
    """
    dates = tuple(panel.dates if dates is None else dates)
    rows = [panel.date_index(d) for d in dates]
    full = evaluate_library(library, panel)
    return FactorMatrix(dates, panel.tickers, tuple(r.id for r in library), full[rows])


# ---------------------------------------------------------------------------
# Combination


@dataclass
class CombineResult:
    scores: dict[str, float]
    contributions: dict[str, dict[int, float]]
    excluded: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class FactorCombiner(Protocol):
    name: str

    def combine(self, factor_slice: FactorSlice) -> CombineResult: ...


def zscore_columns(values: np.ndarray) -> np.ndarray:
    """Cross-sectional z-score per column over finite entries (population std).

    Columns with fewer than two finite entries or zero spread map to 0.
    """
    out = np.full(values.shape, np.nan)
    for f in range(values.shape[1]):
        col = values[:, f]
        ok = np.isfinite(col)
        if ok.sum() == 0:
            continue
        mean = col[ok].mean()
        std = col[ok].std()
        if ok.sum() < 2 or std == 0 or not np.isfinite(std):
            out[ok, f] = 0.0
        else:
            out[ok, f] = (col[ok] - mean) / std
    return out


class LinearZScoreCombiner:
    """score = sum_f weight_f * z_f; contribution_f = weight_f * z_f.

    Stand-in for a learned tree-ensemble scorer: it keeps the same
    score/contribution interface. Missing weights default to 1 / #factors.
    """

    name = "a linear z-score model"

    def __init__(self, weights: Mapping[int, float] | None = None):
        self.weights = dict(weights or {})

    def weight_vector(self, alpha_ids: Sequence[int]) -> np.ndarray:
        default = 1.0 / len(alpha_ids) if alpha_ids else 0.0
        return np.array([float(self.weights.get(a, default)) for a in alpha_ids])

    def combine(self, factor_slice: FactorSlice) -> CombineResult:
        values = np.asarray(factor_slice.values, dtype=float)
        weights = self.weight_vector(factor_slice.alpha_ids)
        z = zscore_columns(values)
        result = CombineResult({}, {})
        for n, ticker in enumerate(factor_slice.tickers):
            ok = np.isfinite(z[n])
            if not ok.any():
                result.excluded.append(ticker)
                msg = f"{ticker}: all factor values are NaN on {factor_slice.date}; excluded"
                result.warnings.append(msg)
                log.warning(msg)
                continue
            contrib = {
                int(a): float(weights[f] * z[n, f])
                for f, a in enumerate(factor_slice.alpha_ids)
                if ok[f]
            }
            result.contributions[ticker] = contrib
            result.scores[ticker] = float(sum(contrib.values()))
        return result


def combine_score(combiner: FactorCombiner, factor_slice: FactorSlice) -> CombineResult:
    return combiner.combine(factor_slice)


def top_k_contributors(contributions: Mapping[int, float], k: int) -> list[tuple[int, float]]:
    """Largest |contribution| first; ties broken by ascending alpha id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(contributions.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return ordered[:k]
