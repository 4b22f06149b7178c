"""Seeded synthetic market: OHLCV panel, daily news and quarterly fundamentals.

Everything here is invented test data. News tone carries a small amount of
information about the next day's return so the offline experts have a signal
to find.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .market_data import OhlcvPanel, write_panel
from .rng import substream

TICKERS = (
    "ACRO", "BLTX", "CRNW", "DVLN", "ELMR", "FNDX", "GRVT", "HLIX", "IONQ", "JSPR",
    "KRNO", "LMNA", "MRDN", "NOVL", "ORBT", "PLSR", "QNTA", "RDNT", "SLCN", "TRVA",
    "UMBR", "VRTX", "WNDR", "XENO", "YLDR", "ZEPH", "ARCH", "BRIO", "CYGN", "DRFT",
)

START = dt.date(2022, 1, 3)
END = dt.date(2023, 12, 29)
QUARTER_STARTS = ((1, 3), (4, 1), (7, 1), (10, 1))

_GOOD = ("strong", "growth", "record", "upgrade", "beat", "robust", "surge", "gains", "upside", "outperform")
_BAD = ("weak", "decline", "downgrade", "miss", "slump", "losses", "cut", "lawsuit", "downside", "underperform")
_NEUTRAL = (
    "{t} executives spoke at an industry conference on {d}.",
    "Analysts continue to watch {t} ahead of its next product cycle.",
    "Trading volume in {t} shares was in line with recent sessions.",
    "{t} reiterated its capital allocation priorities.",
)
_TONE = (
    "Reports point to {w1} demand and {w2} momentum at {t}.",
    "Market commentary on {t} mentions {w1} margins and {w2} guidance.",
    "Several brokers describe {w1} conditions for {t}, citing {w2} orders.",
)


@dataclass(frozen=True)
class SyntheticMarket:
    panel: OhlcvPanel
    news: list[dict]
    fundamentals: list[dict]


def business_days(start: dt.date, end: dt.date) -> list[dt.date]:
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def quarter_dates(days: list[dt.date]) -> list[dt.date]:
    """First trading day on or after each quarter start inside the calendar."""
    out = []
    for year in range(days[0].year, days[-1].year + 1):
        for month, day in QUARTER_STARTS:
            anchor = dt.date(year, month, day)
            first = next((d for d in days if d >= anchor), None)
            if first is not None and first not in out:
                out.append(first)
    return out


def _article(rng: np.random.Generator, ticker: str, date: dt.date, tone: int) -> str:
    words = _GOOD if tone > 0 else _BAD
    w1, w2 = rng.choice(len(words), size=2, replace=False)
    neutral = _NEUTRAL[int(rng.integers(len(_NEUTRAL)))]
    tone_line = _TONE[int(rng.integers(len(_TONE)))]
    return " ".join(
        [
            neutral.format(t=ticker, d=date.isoformat()),
            tone_line.format(t=ticker, w1=words[w1], w2=words[w2]),
        ]
    )


def generate(seed: int = 0, tickers: tuple[str, ...] = TICKERS, start: dt.date = START, end: dt.date = END) -> SyntheticMarket:
    days = business_days(start, end)
    tickers = tuple(sorted(tickers))
    n_days, n = len(days), len(tickers)
    price_rng = substream(seed, "synthetic.prices")
    news_rng = substream(seed, "synthetic.news")
    fund_rng = substream(seed, "synthetic.fundamentals")

    quarters = quarter_dates(days)
    q_index = np.searchsorted(np.array([d.toordinal() for d in quarters]), [d.toordinal() for d in days], side="right") - 1
    growth = fund_rng.normal(0.03, 0.08, size=(len(quarters), n))

    # news tone on day t nudges the return from t to t+1
    has_news = np.zeros((n_days, n), dtype=bool)
    tone = np.zeros((n_days, n), dtype=int)
    gap = np.zeros(n, dtype=int)
    for i in range(n_days):
        draw = news_rng.random(n) < 0.5
        force = gap >= 2
        has_news[i] = draw | force
        gap = np.where(has_news[i], 0, gap + 1)
        tone[i] = np.where(news_rng.random(n) < 0.5, 1, -1)

    beta = price_rng.uniform(0.6, 1.4, size=n)
    vol = price_rng.uniform(0.010, 0.022, size=n)
    base = price_rng.uniform(20.0, 300.0, size=n)
    log_close = np.empty((n_days, n))
    log_close[0] = np.log(base)
    market = price_rng.normal(0.0003, 0.008, size=n_days)
    eps = price_rng.normal(0.0, 1.0, size=(n_days, n))
    for i in range(1, n_days):
        signal = 0.006 * tone[i - 1] * has_news[i - 1]
        drift = 0.0004 * np.sign(growth[q_index[i]])
        log_close[i] = log_close[i - 1] + beta * market[i] + vol * eps[i] + signal + drift
    close = np.exp(log_close)
    prev = np.vstack([close[:1], close[:-1]])
    open_ = prev * np.exp(price_rng.normal(0.0, 0.004, size=(n_days, n)))
    spread = np.abs(price_rng.normal(0.0, 0.006, size=(n_days, n)))
    high = np.maximum(open_, close) * (1.0 + spread)
    low = np.minimum(open_, close) * (1.0 - np.abs(price_rng.normal(0.0, 0.006, size=(n_days, n))))
    volume = np.round(np.exp(price_rng.normal(13.5, 0.4, size=(n_days, n))))

    panel = OhlcvPanel(
        tickers,
        tuple(days),
        np.round(open_, 4),
        np.round(high, 4),
        np.round(low, 4),
        np.round(close, 4),
        volume,
    )

    news = []
    for i, d in enumerate(days):
        for j, t in enumerate(tickers):
            if has_news[i, j]:
                news.append({"ticker": t, "date": d.isoformat(), "text": _article(news_rng, t, d, tone[i, j])})

    fundamentals = []
    for qi, qd in enumerate(quarters):
        for j, t in enumerate(tickers):
            g = float(growth[qi, j])
            revenue = float(fund_rng.uniform(0.5, 40.0))
            margin = float(fund_rng.uniform(0.2, 0.7))
            eps_value = float(fund_rng.uniform(0.2, 6.0))
            outlook = "raised" if g > 0.02 else ("maintained" if g >= -0.02 else "lowered")
            summary = (
                f"{t} reported quarterly revenue of ${revenue:.1f}B with a gross margin of {margin:.0%}. "
                f"Management {outlook} its full-year outlook on the call."
            )
            fundamentals.append(
                {
                    "ticker": t,
                    "date": qd.isoformat(),
                    "summary": summary,
                    "metrics": {
                        "EPS": f"{eps_value:.2f}",
                        "EPS Growth (YoY)": f"{g:+.1%}",
                        "Revenue ($B)": f"{revenue:.1f}",
                        "Gross Margin": f"{margin:.1%}",
                    },
                    "eps_growth": round(g, 6),
                }
            )
    return SyntheticMarket(panel, news, fundamentals)


FIXTURE_INI = """\
# Offline fixture: 30 invented tickers, mock experts.
[data]
panel = panel.csv
news = news.jsonl
fundamentals = fundamentals.jsonl
news_lookback_days = 7

[split]
train = 2022-01-01,2022-06-30
valid = 2022-07-01,2022-12-31
test = 2023-01-01,2023-12-31

[run]
seed = 0
horizon = 1
k = 3
experts = news,market,alpha,fundamental
jobs = 1

[backend]
kind = mock
"""


def _write_jsonl(rows: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_fixture(directory: str | Path, seed: int = 0) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    market = generate(seed)
    write_panel(market.panel, out / "panel.csv")
    _write_jsonl(market.news, out / "news.jsonl")
    _write_jsonl(market.fundamentals, out / "fundamentals.jsonl")
    (out / "fixture.ini").write_text(FIXTURE_INI, encoding="utf-8")


def fixture_dir() -> Path:
    return Path(__file__).resolve().parent / "data" / "fixture"


if __name__ == "__main__":  # pragma: no cover
    write_fixture(fixture_dir())
