"""Daily buy-and-hold Top-K simulation and performance metrics."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .market_data import TRADING_DAYS_PER_YEAR, OhlcvPanel

log = logging.getLogger(__name__)


class BacktestError(ValueError):
    pass


class MissingRanking(BacktestError):
    def __init__(self, date: dt.date):
        super().__init__(f"no ranking for {date.isoformat()}")
        self.date = date


class MissingBar(BacktestError):
    def __init__(self, ticker: str, date: dt.date):
        super().__init__(f"no close for {ticker} on {date.isoformat()}")
        self.ticker = ticker
        self.date = date


class InvalidReturn(BacktestError):
    pass


class ZeroVolatility(BacktestError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    k: int = 3
    cost_rate: float = 0.0
    initial_capital: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.cost_rate < 1.0:
            raise ValueError("cost_rate must be in [0, 1)")
        if not self.initial_capital > 0:
            raise ValueError("initial_capital must be > 0")


def annualized_return(daily_returns: Sequence[float]) -> float:
    r = np.asarray(daily_returns, dtype=float)
    if r.size == 0:
        raise ValueError("at least one return is required")
    if np.any(r <= -1.0):
        raise InvalidReturn("daily returns must be > -1")
    growth = float(np.prod(1.0 + r))
    return growth ** (TRADING_DAYS_PER_YEAR / r.size) - 1.0


def annualized_vol(daily_returns: Sequence[float]) -> float:
    r = np.asarray(daily_returns, dtype=float)
    if r.size < 2:
        raise ValueError("volatility needs at least 2 returns")
    if np.all(r == r[0]):
        return 0.0  # avoid a rounding residue from the mean
    return float(r.std(ddof=1)) * math.sqrt(TRADING_DAYS_PER_YEAR)


def sharpe(ar: float, av: float, rf: float = 0.0) -> float:
    if not av > 0:
        raise ZeroVolatility("annualized volatility must be > 0")
    return (ar - rf) / av


def max_drawdown(curve: Sequence[float]) -> float:
    c = np.asarray(curve, dtype=float)
    if c.size == 0:
        raise ValueError("curve is empty")
    if np.any(c <= 0):
        raise ValueError("curve values must be > 0")
    peak = np.maximum.accumulate(c)
    return float(np.max((peak - c) / peak))


def curve_from_returns(daily_returns: Sequence[float]) -> np.ndarray:
    return np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(daily_returns, dtype=float))])


@dataclass(frozen=True)
class BacktestResult:
    dates: tuple[dt.date, ...]
    returns: np.ndarray
    curve: np.ndarray
    holdings: tuple[tuple[str, ...], ...]
    ar: float
    av: float
    sr: float
    md: float

    def metrics(self) -> dict[str, float]:
        return {"AR": self.ar, "AV": self.av, "SR": self.sr, "MD": self.md}

    def to_csv(self, path: str | Path) -> None:
        """Row 0 is the start date with zero return; row t+1 carries the day's holdings."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "portfolio_return", "cumulative", "holdings"])
            w.writerow([self.dates[0].isoformat(), repr(0.0), repr(1.0), ""])
            for i, held in enumerate(self.holdings):
                w.writerow(
                    [self.dates[i + 1].isoformat(), repr(float(self.returns[i])), repr(float(self.curve[i + 1])), ";".join(held)]
                )


def _select(ranking: Sequence[str], panel: OhlcvPanel, k: int, date: dt.date) -> tuple[str, ...]:
    available = [t for t in ranking if t in panel.tickers]
    held = tuple(available[:k])
    if len(held) < k:
        log.warning("%s: only %d rankable tickers for K=%d; holding all", date.isoformat(), len(held), k)
    return held


def run_topk(
    panel: OhlcvPanel,
    rankings: Mapping[dt.date, Sequence[str]],
    cfg: StrategyConfig,
    dates: Sequence[dt.date] | None = None,
) -> BacktestResult:
    """Hold the Top-K of day t's ranking, equal-weighted, from close(t) to close(t+1).

    Turnover is the L1 change of target weights (the first day is bought from
    cash) and is charged at ``cost_rate``.
    """
    days = tuple(dates) if dates is not None else panel.dates
    if len(days) < 2:
        raise BacktestError("backtest needs at least 2 dates")
    close = panel.field("close")
    idx = [panel.date_index(d) for d in days]
    prev: dict[str, float] = {}
    returns = []
    holdings = []
    for i in range(len(days) - 1):
        day = days[i]
        if day not in rankings:
            raise MissingRanking(day)
        held = _select(rankings[day], panel, cfg.k, day)
        if not held:
            raise BacktestError(f"{day.isoformat()}: nothing to hold")
        weights = {t: 1.0 / len(held) for t in held}
        gross = 0.0
        for t in held:
            j = panel.ticker_index(t)
            c0, c1 = close[idx[i], j], close[idx[i + 1], j]
            if not (np.isfinite(c0) and np.isfinite(c1)):
                raise MissingBar(t, day if not np.isfinite(c0) else days[i + 1])
            gross += weights[t] * (c1 / c0 - 1.0)
        turnover = sum(abs(weights.get(t, 0.0) - prev.get(t, 0.0)) for t in set(weights) | set(prev))
        returns.append(gross - cfg.cost_rate * turnover)
        holdings.append(held)
        prev = weights
    r = np.asarray(returns)
    curve = curve_from_returns(r)
    ar = annualized_return(r)
    av = annualized_vol(r) if r.size >= 2 else math.nan
    sr = (ar / av) if av and av > 0 else math.nan
    return BacktestResult(days, r, curve, tuple(holdings), ar, av, sr, max_drawdown(curve))
