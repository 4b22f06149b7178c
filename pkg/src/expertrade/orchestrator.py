"""End-to-end pipeline: specialist fan-out, summarization, General Expert prediction and ranking."""

from __future__ import annotations

import datetime as dt
import json
import threading
import time
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .alpha.factors import (
    AlphaRecord,
    FactorCombiner,
    FactorSlice,
    LinearZScoreCombiner,
    evaluate_library,
    top_k_contributors,
)
from .experts.backends import ExpertBackend
from .experts.general import Comparison, general_compare, general_predict
from .experts.parsing import parse_response
from .experts.prompts import (
    build_alpha_prompt,
    build_fundamental_prompt,
    build_general_predict_prompt,
    build_market_prompt,
    build_news_prompt,
)
from .experts.schema import SPECIALISTS, ExpertKind, ExpertReport, PromptBundle, SummarizedReport
from .experts.summary import summarize_reports
from .market_data import FIELDS, OhlcvPanel
from .ranking import CountingComparator, RankingResult, relaxed_sort
from .reprogram import Reprogrammer
from .stats_summary import render_text, summarize


class MissingInput(LookupError):
    def __init__(self, kind: ExpertKind, ticker: str, date: dt.date, what: str):
        super().__init__(f"{kind.value} expert has no input for {ticker} on {date.isoformat()}: {what}")
        self.kind = kind
        self.ticker = ticker
        self.date = date
        self.what = what


# ---------------------------------------------------------------------------
# Inputs


@dataclass(frozen=True)
class NewsItem:
    date: dt.date
    text: str


@dataclass(frozen=True)
class FundamentalRecord:
    date: dt.date
    summary: str
    metrics: tuple[tuple[str, str], ...]
    eps_growth: float


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows


def load_news(path: str | Path) -> dict[str, list[NewsItem]]:
    """Articles per ticker in date order (file order within a day)."""
    out: dict[str, list[NewsItem]] = {}
    for row in _read_jsonl(path):
        out.setdefault(row["ticker"], []).append(NewsItem(dt.date.fromisoformat(row["date"]), row["text"]))
    for items in out.values():
        items.sort(key=lambda it: it.date)
    return out


def load_fundamentals(path: str | Path) -> dict[str, list[FundamentalRecord]]:
    out: dict[str, list[FundamentalRecord]] = {}
    for row in _read_jsonl(path):
        rec = FundamentalRecord(
            dt.date.fromisoformat(row["date"]),
            row["summary"],
            tuple((str(k), str(v)) for k, v in row.get("metrics", {}).items()),
            float(row.get("eps_growth", 0.0)),
        )
        out.setdefault(row["ticker"], []).append(rec)
    for items in out.values():
        items.sort(key=lambda r: r.date)
    return out


@dataclass
class DataBundle:
    panel: OhlcvPanel
    news: Mapping[str, list[NewsItem]]
    fundamentals: Mapping[str, list[FundamentalRecord]]
    library: Sequence[AlphaRecord]
    combiner: FactorCombiner = field(default_factory=LinearZScoreCombiner)
    reprogrammer: Reprogrammer | None = None


@dataclass(frozen=True)
class PipelineConfig:
    experts: tuple[ExpertKind, ...] = SPECIALISTS
    horizon_days: int = 1
    seed: int = 0
    window: int = 20
    top_factors: int = 5
    budget: int = 2000
    news_lookback_days: int = 7
    compare_retries: int = 3
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.experts:
            raise ValueError("at least one expert must be enabled")
        unknown = [k for k in self.experts if k not in SPECIALISTS]
        if unknown:
            raise ValueError(f"not specialist experts: {unknown}")
        # normalize to the fixed fan-out order
        object.__setattr__(self, "experts", tuple(k for k in SPECIALISTS if k in self.experts))
        if self.horizon_days < 1 or self.window < 2 or self.top_factors < 1 or self.budget < 1:
            raise ValueError("horizon, window, top_factors and budget must be positive")
        if self.compare_retries < 1 or self.jobs < 1:
            raise ValueError("compare_retries and jobs must be >= 1")

    @property
    def removed(self) -> tuple[ExpertKind, ...]:
        return tuple(k for k in SPECIALISTS if k not in self.experts)

    @property
    def name(self) -> str:
        if not self.removed:
            return "full"
        return "w/o " + "+".join(k.value for k in self.removed)


# ---------------------------------------------------------------------------
# Run log


_KIND_ORDER = {k: i for i, k in enumerate(ExpertKind)}


class RunLog:
    """Collects one record per expert call; written sorted, so completion order never matters."""

    def __init__(self, timing: bool = False):
        self.timing = timing
        self._records: dict[tuple, dict] = {}
        self._lock = threading.Lock()

    def add(self, bundle: PromptBundle, backend: ExpertBackend, label: str | None, latency: float, **extra: Any) -> None:
        date = bundle.date.isoformat() if bundle.date else ""
        digest = bundle.digest()
        rec = {
            "date": date,
            "kind": bundle.kind.value,
            "ticker": bundle.ticker,
            "bundle": digest,
            "backend": backend.identity,
            "latency": round(latency, 6) if self.timing else None,
            "label": label,
        }
        rec.update(extra)
        key = (date, _KIND_ORDER[bundle.kind], bundle.ticker, digest)
        with self._lock:
            self._records[key] = rec

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[dict]:
        return [self._records[k] for k in sorted(self._records)]

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class PredictionOutcome:
    general: ExpertReport
    experts: tuple[ExpertReport, ...]
    summary: SummarizedReport


@dataclass(frozen=True)
class RankingOutcome:
    date: dt.date
    top: tuple[str, ...]
    ranking: RankingResult
    comparator_calls: int
    fallbacks: int


class Pipeline:
    def __init__(
        self,
        config: PipelineConfig,
        data: DataBundle,
        backends: Mapping[ExpertKind, ExpertBackend] | ExpertBackend,
        run_log: RunLog | None = None,
    ):
        self.config = config
        self.data = data
        if isinstance(backends, Mapping):
            self.backends = dict(backends)
        else:
            self.backends = {k: backends for k in ExpertKind}
        missing = [k.value for k in (*config.experts, ExpertKind.GENERAL_PREDICT, ExpertKind.GENERAL_COMPARE) if k not in self.backends]
        if missing:
            raise ValueError(f"no backend for {missing}")
        self.log = run_log if run_log is not None else RunLog()
        self.reprogrammer = data.reprogrammer
        if self.reprogrammer is None and ExpertKind.MARKET in config.experts:
            from .reprogram import PatchConfig

            self.reprogrammer = Reprogrammer.default(config.seed, PatchConfig(window=config.window))
        self._factors: np.ndarray | None = None
        self._scores: dict[dt.date, Any] = {}
        self._reports: dict[tuple, ExpertReport] = {}
        self._summaries: dict[tuple[str, dt.date], SummarizedReport] = {}
        self._lock = threading.RLock()

    # -- backend calls ----------------------------------------------------

    def _call(self, bundle: PromptBundle) -> tuple[str, float]:
        backend = self.backends[bundle.kind]
        start = time.perf_counter()
        raw = backend.answer(bundle)
        return raw, time.perf_counter() - start

    def _specialist(self, bundle: PromptBundle, ticker: str, date: dt.date) -> ExpertReport:
        raw, latency = self._call(bundle)
        prediction, reasoning = parse_response(raw, bundle.kind)
        self.log.add(bundle, self.backends[bundle.kind], prediction.value, latency)
        return ExpertReport(bundle.kind, ticker, date, prediction, reasoning, raw)

    def _cached(self, key: tuple, compute: Callable[[], ExpertReport]) -> ExpertReport:
        with self._lock:
            hit = self._reports.get(key)
        if hit is not None:
            return hit
        report = compute()
        with self._lock:
            return self._reports.setdefault(key, report)

    # -- inputs -----------------------------------------------------------

    def _row(self, ticker: str, date: dt.date) -> tuple[int, int]:
        panel = self.data.panel
        try:
            return panel.date_index(date), panel.ticker_index(ticker)
        except (KeyError, ValueError) as exc:
            raise MissingInput(ExpertKind.MARKET, ticker, date, f"no bar ({exc})") from None

    def news_item(self, ticker: str, date: dt.date) -> NewsItem:
        items = self.data.news.get(ticker, [])
        pos = bisect_right(items, date, key=lambda it: it.date)
        if pos == 0:
            raise MissingInput(ExpertKind.NEWS, ticker, date, "no article on or before this date")
        item = items[pos - 1]
        if (date - item.date).days > self.config.news_lookback_days:
            raise MissingInput(
                ExpertKind.NEWS, ticker, date, f"latest article ({item.date}) is older than the lookback"
            )
        return item

    def fundamental_record(self, ticker: str, date: dt.date) -> FundamentalRecord:
        recs = self.data.fundamentals.get(ticker, [])
        pos = bisect_right(recs, date, key=lambda r: r.date)
        if pos == 0:
            raise MissingInput(ExpertKind.FUNDAMENTAL, ticker, date, "no fundamentals reported yet")
        return recs[pos - 1]

    def factor_values(self) -> np.ndarray:
        with self._lock:
            if self._factors is None:
                self._factors = evaluate_library(self.data.library, self.data.panel)
            return self._factors

    def day_scores(self, date: dt.date):
        with self._lock:
            if date not in self._scores:
                i = self.data.panel.date_index(date)
                values = self.factor_values()[i]
                fs = FactorSlice(date, self.data.panel.tickers, tuple(r.id for r in self.data.library), values)
                self._scores[date] = (fs, self.data.combiner.combine(fs))
            return self._scores[date]

    # -- specialists ------------------------------------------------------

    def news_report(self, ticker: str, date: dt.date) -> ExpertReport:
        item = self.news_item(ticker, date)

        def compute() -> ExpertReport:
            bundle = build_news_prompt(item.text, self.config.horizon_days, ticker=ticker, date=date)
            return self._specialist(bundle, ticker, date)

        return self._cached((ExpertKind.NEWS, ticker, date), compute)

    def market_report(self, ticker: str, date: dt.date) -> ExpertReport:
        i, j = self._row(ticker, date)
        w = self.config.window
        if i + 1 < max(w, 6):
            raise MissingInput(ExpertKind.MARKET, ticker, date, f"needs {w} bars of history, have {i + 1}")

        def compute() -> ExpertReport:
            panel = self.data.panel
            window = np.stack([panel.field(f)[i - w + 1 : i + 1, j] for f in FIELDS])
            emb = self.reprogrammer.encode(window)
            closes = window[FIELDS.index("close")]
            stats = render_text(summarize(closes))
            close = panel.close
            momentum = float(close[i, j] / close[i - 5, j] - 1.0)
            bundle = build_market_prompt(
                emb.reference(),
                stats,
                self.config.horizon_days,
                window=w,
                ticker=ticker,
                date=date,
                features={"momentum_5d": momentum},
            )
            return self._specialist(bundle, ticker, date)

        return self._cached((ExpertKind.MARKET, ticker, date), compute)

    def alpha_report(self, ticker: str, date: dt.date) -> ExpertReport:
        self._row(ticker, date)
        fs, combined = self.day_scores(date)
        if ticker not in combined.scores:
            raise MissingInput(ExpertKind.ALPHA, ticker, date, "all factor values are NaN (warm-up)")

        def compute() -> ExpertReport:
            by_id = {r.id: r for r in self.data.library}
            col = {a: f for f, a in enumerate(fs.alpha_ids)}
            n = fs.tickers.index(ticker)
            top = top_k_contributors(combined.contributions[ticker], self.config.top_factors)
            topk = [(by_id[a], float(fs.values[n, col[a]]), c) for a, c in top]
            bundle = build_alpha_prompt(
                topk,
                combined.scores[ticker],
                self.config.horizon_days,
                combiner_name=getattr(self.data.combiner, "name", "a linear z-score model"),
                ticker=ticker,
                date=date,
            )
            return self._specialist(bundle, ticker, date)

        return self._cached((ExpertKind.ALPHA, ticker, date), compute)

    def fundamental_report(self, ticker: str, date: dt.date) -> ExpertReport:
        """Computed once per quarterly record and carried forward to each day."""
        rec = self.fundamental_record(ticker, date)

        def compute() -> ExpertReport:
            bundle = build_fundamental_prompt(
                rec.summary, rec.metrics, ticker=ticker, date=rec.date, features={"eps_growth": rec.eps_growth}
            )
            return self._specialist(bundle, ticker, rec.date)

        quarterly = self._cached((ExpertKind.FUNDAMENTAL, ticker, rec.date), compute)
        return ExpertReport(
            quarterly.kind, ticker, date, quarterly.prediction, quarterly.reasoning, quarterly.raw_response
        )

    def expert_reports(self, ticker: str, date: dt.date) -> tuple[ExpertReport, ...]:
        handlers = {
            ExpertKind.NEWS: self.news_report,
            ExpertKind.MARKET: self.market_report,
            ExpertKind.ALPHA: self.alpha_report,
            ExpertKind.FUNDAMENTAL: self.fundamental_report,
        }
        return tuple(handlers[k](ticker, date) for k in self.config.experts)

    def summary(self, ticker: str, date: dt.date) -> SummarizedReport:
        key = (ticker, date)
        with self._lock:
            hit = self._summaries.get(key)
        if hit is not None:
            return hit
        s = summarize_reports(self.expert_reports(ticker, date), self.config.budget)
        with self._lock:
            return self._summaries.setdefault(key, s)

    # -- general expert ---------------------------------------------------

    def run_prediction(self, ticker: str, date: dt.date) -> PredictionOutcome:
        reports = self.expert_reports(ticker, date)
        summary = self.summary(ticker, date)
        backend = self.backends[ExpertKind.GENERAL_PREDICT]
        start = time.perf_counter()
        general = general_predict(summary, backend, self.config.horizon_days)
        bundle = build_general_predict_prompt(summary.text, self.config.horizon_days, ticker=ticker, date=date)
        self.log.add(bundle, backend, general.prediction.value, time.perf_counter() - start)
        return PredictionOutcome(general, reports, summary)

    def _map(self, fn: Callable, items: Sequence) -> list:
        if self.config.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def predict_many(self, pairs: Sequence[tuple[str, dt.date]]) -> list[PredictionOutcome]:
        return self._map(lambda p: self.run_prediction(*p), list(pairs))

    def run_ranking_day(self, tickers: Iterable[str], date: dt.date, k: int) -> RankingOutcome:
        names = sorted(set(tickers))
        if len(names) < 2:
            raise ValueError("ranking needs at least 2 tickers")
        if k < 1:
            raise ValueError("k must be >= 1")
        summaries = dict(zip(names, self._map(lambda t: self.summary(t, date), names)))
        backend = self.backends[ExpertKind.GENERAL_COMPARE]
        fallbacks = 0
        lock = threading.Lock()

        def compare(a: str, b: str) -> bool:
            nonlocal fallbacks
            start = time.perf_counter()
            result: Comparison = general_compare(
                summaries[a], summaries[b], backend, self.config.horizon_days, self.config.compare_retries
            )
            self.log.add(
                result.bundle,
                backend,
                result.choice.value,
                time.perf_counter() - start,
                attempts=result.attempts,
                fallback=result.fallback,
            )
            if result.fallback:
                with lock:
                    fallbacks += 1
            return result.winner == a

        counter = CountingComparator(compare)
        ranking = relaxed_sort(names, counter, jobs=self.config.jobs)
        return RankingOutcome(date, ranking.order[:k], ranking, counter.calls, fallbacks)
