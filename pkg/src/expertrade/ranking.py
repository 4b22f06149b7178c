"""Comparison-based Top-K selection, a noisy comparator model and rank-quality metrics."""

from __future__ import annotations

import csv
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .rng import substream

# comparator(a, b) -> True when a is judged better than b
Comparator = Callable[[str, str], bool]


class DegenerateInput(UserWarning):
    """A rank correlation was undefined because one side is constant."""


class RankingAborted(RuntimeError):
    def __init__(self, cause: BaseException, partial_wins: Mapping[str, int], calls: int):
        super().__init__(f"comparator failed after {calls} calls: {cause}")
        self.cause = cause
        self.partial_wins = dict(partial_wins)
        self.calls = calls


class CountingComparator:
    """Wraps a comparator and counts invocations (thread-safe)."""

    def __init__(self, inner: Comparator):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, a: str, b: str) -> bool:
        with self._lock:
            self.calls += 1
        return self.inner(a, b)


class CachingComparator:
    """Memoizes results per ordered pair; create one per trading day."""

    def __init__(self, inner: Comparator):
        self.inner = inner
        self.cache: dict[tuple[str, str], bool] = {}

    def __call__(self, a: str, b: str) -> bool:
        if (a, b) in self.cache:
            return self.cache[(a, b)]
        if (b, a) in self.cache:
            return not self.cache[(b, a)]
        result = bool(self.inner(a, b))
        self.cache[(a, b)] = result
        return result


@dataclass(frozen=True)
class RankingResult:
    order: tuple[str, ...]
    wins: Mapping[str, int] = field(default_factory=dict)
    calls: int = 0

    def top(self, k: int) -> tuple[str, ...]:
        return self.order[:k]


def _check_tickers(tickers: Iterable[str]) -> list[str]:
    items = list(tickers)
    if not items:
        raise ValueError("at least one ticker is required")
    if len(set(items)) != len(items):
        raise ValueError("duplicate tickers")
    return items


def relaxed_sort(tickers: Iterable[str], comparator: Comparator, jobs: int = 1) -> RankingResult:
    """All-pairs comparison with win counts.

    Each unordered pair is compared once with the ticker-ascending member
    first; the ranking is by wins descending, then ticker ascending.
    """
    names = sorted(_check_tickers(tickers))
    pairs = list(combinations(names, 2))
    wins = dict.fromkeys(names, 0)
    done = 0

    def tally(pair: tuple[str, str], a_wins: bool) -> None:
        wins[pair[0] if a_wins else pair[1]] += 1

    try:
        if jobs > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(comparator, a, b) for a, b in pairs]
                results = []
                for fut in futures:
                    results.append(bool(fut.result()))
            for pair, res in zip(pairs, results):
                tally(pair, res)
                done += 1
        else:
            for a, b in pairs:
                tally((a, b), bool(comparator(a, b)))
                done += 1
    except Exception as exc:
        raise RankingAborted(exc, wins, done) from exc
    order = tuple(sorted(names, key=lambda t: (-wins[t], t)))
    return RankingResult(order, wins, len(pairs))


def bubble_topk(tickers: Iterable[str], comparator: Comparator, k: int) -> RankingResult:
    """K bubble passes from the back, each moving the best remaining ticker forward.

    Returns the whole array after the passes; its first K entries are the Top-K.
    """
    arr = _check_tickers(tickers)
    n = len(arr)
    if not 1 <= k <= n:
        raise ValueError(f"K must be in [1, {n}], got {k}")
    calls = 0
    for p in range(min(k, n - 1)):
        for j in range(n - 1, p, -1):
            calls += 1
            if comparator(arr[j], arr[j - 1]):
                arr[j], arr[j - 1] = arr[j - 1], arr[j]
    return RankingResult(tuple(arr), {}, calls)


def quick_sort(tickers: Iterable[str], comparator: Comparator, seed: int = 0) -> RankingResult:
    """Randomized-pivot quicksort, best first."""
    items = _check_tickers(tickers)
    rng = np.random.default_rng(seed)
    calls = 0

    def sort(part: list[str]) -> list[str]:
        nonlocal calls
        if len(part) <= 1:
            return part
        pivot = part[int(rng.integers(len(part)))]
        better, worse = [], []
        for x in part:
            if x == pivot:
                continue
            calls += 1
            (better if comparator(x, pivot) else worse).append(x)
        return sort(better) + [pivot] + sort(worse)

    return RankingResult(tuple(sort(items)), {}, calls)


def expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass(frozen=True)
class NoisyComparatorModel:
    """Logistic judge: P(a beats b) = 1 / (1 + exp(-beta * (q_a - q_b)))."""

    qualities: Mapping[str, float]
    beta: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")

    @classmethod
    def random(cls, n: int, beta: float, seed: int = 0) -> NoisyComparatorModel:
        rng = substream(seed, "ranking.qualities")
        width = len(str(n - 1))
        q = rng.standard_normal(n)
        return cls({f"S{i:0{width}d}": float(v) for i, v in enumerate(q)}, beta, seed)

    @property
    def tickers(self) -> list[str]:
        return sorted(self.qualities)

    def prob(self, a: str, b: str) -> float:
        return expit(self.beta * (self.qualities[a] - self.qualities[b]))

    def comparator(self, rng: np.random.Generator) -> Comparator:
        def judge(a: str, b: str) -> bool:
            return bool(rng.random() < self.prob(a, b))

        return judge


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    rx, ry = average_ranks(x), average_ranks(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        warnings.warn("rank correlation undefined for a constant input", DegenerateInput, stacklevel=3)
        return math.nan
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


def rank_ic(predicted_order: Sequence[str], realized: Mapping[str, float]) -> float:
    """Spearman correlation between predicted position (best first) and realized values."""
    if len(predicted_order) < 2:
        raise ValueError("rank_ic needs at least 2 tickers")
    if set(predicted_order) != set(realized) or len(set(predicted_order)) != len(predicted_order):
        raise ValueError("predicted order and realized returns must cover the same tickers")
    n = len(predicted_order)
    score = [float(n - i) for i in range(n)]
    return spearman(score, [realized[t] for t in predicted_order])


def rank_icir(daily_ics: Sequence[float]) -> float:
    """Mean over sample std of daily IC values (NaN days are skipped)."""
    ics = np.asarray([v for v in daily_ics if not math.isnan(v)], dtype=float)
    if len(ics) < 2:
        raise ValueError("rank_icir needs at least 2 finite daily values")
    sd = float(ics.std(ddof=1))
    if sd == 0.0:
        warnings.warn("RankICIR undefined for constant daily IC", DegenerateInput, stacklevel=2)
        return math.nan
    return float(ics.mean()) / sd


ALGORITHMS = ("relaxed", "bubble", "quick")


@dataclass(frozen=True)
class AblationRow:
    algorithm: str
    mean_rank_ic: float
    mean_rank_icir: float
    mean_calls: float
    trials: int
    beta: float
    n: int
    k: int


def run_algorithm(name: str, tickers: Sequence[str], comparator: Comparator, k: int, seed: int) -> RankingResult:
    if name == "relaxed":
        return relaxed_sort(tickers, comparator)
    if name == "bubble":
        return bubble_topk(tickers, comparator, k)
    if name == "quick":
        return quick_sort(tickers, comparator, seed)
    raise ValueError(f"unknown ranking algorithm {name!r}")


def simulate_ablation(
    model: NoisyComparatorModel,
    k: int,
    trials: int,
    algorithms: Sequence[str] = ALGORITHMS,
) -> list[AblationRow]:
    """Monte-Carlo comparison of sorting algorithms under a noisy comparator.

    Every trial draws a fresh input order, fresh comparator noise and a fresh
    pivot seed from a named substream of ``model.seed``; RankIC compares each
    algorithm's full output order with the latent qualities.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tickers = model.tickers
    n = len(tickers)
    rows = []
    for name in algorithms:
        noise = substream(model.seed, f"ranking.ablation.{name}")
        ics, calls = [], []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateInput)
            for t in range(trials):
                shuffled = [tickers[i] for i in noise.permutation(n)]
                counter = CountingComparator(model.comparator(noise))
                result = run_algorithm(name, shuffled, counter, k, seed=int(noise.integers(2**63 - 1)))
                ics.append(rank_ic(result.order, model.qualities))
                calls.append(counter.calls)
            icir = rank_icir(ics) if trials >= 2 else math.nan
        rows.append(AblationRow(name, float(np.nanmean(ics)), icir, float(np.mean(calls)), trials, model.beta, n, k))
    return rows


ABLATION_COLUMNS = ("algorithm", "mean_rank_ic", "mean_rank_icir", "mean_calls", "trials", "beta", "N", "K")


def write_ablation_csv(rows: Sequence[AblationRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ABLATION_COLUMNS)
        for r in rows:
            w.writerow([r.algorithm, repr(r.mean_rank_ic), repr(r.mean_rank_icir), repr(r.mean_calls), r.trials, repr(r.beta), r.n, r.k])
