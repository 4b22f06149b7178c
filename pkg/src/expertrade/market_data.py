"""OHLCV panels: loading, validation, chronological splits and movement labels."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

COLUMNS = ("ticker", "date", "open", "high", "low", "close", "volume")
FIELDS = ("open", "high", "low", "close", "volume")
TRADING_DAYS_PER_YEAR = 252


class PanelError(ValueError):
    """Base class for panel loading and slicing errors."""


class MalformedRow(PanelError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvariantViolation(PanelError):
    def __init__(self, ticker: str, date: dt.date, rule: str):
        super().__init__(f"{ticker} {date.isoformat()}: {rule}")
        self.ticker = ticker
        self.date = date
        self.rule = rule


class MisalignedCalendar(PanelError):
    def __init__(self, ticker: str, missing: Sequence[dt.date]):
        shown = ", ".join(d.isoformat() for d in missing[:5])
        more = "" if len(missing) <= 5 else f" (+{len(missing) - 5} more)"
        super().__init__(f"{ticker} is missing {len(missing)} trading day(s): {shown}{more}")
        self.ticker = ticker
        self.missing = tuple(missing)


class EmptySplit(PanelError):
    pass


class OutOfRange(PanelError):
    pass


class MovementLabel(str, enum.Enum):
    RISE = "Rise"
    FALL = "Fall"


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float


def check_bar(ticker: str, bar: OhlcvBar) -> None:
    """Raise InvariantViolation if the bar breaks a price/volume rule."""
    prices = (bar.open, bar.high, bar.low, bar.close)
    if not all(np.isfinite(prices)) or not np.isfinite(bar.volume):
        raise InvariantViolation(ticker, bar.date, "non-finite value")
    if min(prices) <= 0:
        raise InvariantViolation(ticker, bar.date, "prices must be > 0")
    if bar.volume < 0:
        raise InvariantViolation(ticker, bar.date, "volume must be >= 0")
    if bar.high < bar.low:
        raise InvariantViolation(ticker, bar.date, "high < low")
    if bar.low > min(bar.open, bar.close):
        raise InvariantViolation(ticker, bar.date, "low > min(open, close)")
    if max(bar.open, bar.close) > bar.high:
        raise InvariantViolation(ticker, bar.date, "max(open, close) > high")


@dataclass(frozen=True, eq=False)
class OhlcvPanel:
    """Calendar-aligned bars, one (dates x tickers) array per field.

    Tickers are sorted ascending; arrays are read-only.
    """

    tickers: tuple[str, ...]
    dates: tuple[dt.date, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self) -> None:
        shape = (len(self.dates), len(self.tickers))
        for name in FIELDS:
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if list(self.tickers) != sorted(set(self.tickers)):
            raise ValueError("tickers must be unique and sorted")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "_date_index", {d: i for i, d in enumerate(self.dates)})
        object.__setattr__(self, "_ticker_index", {t: i for i, t in enumerate(self.tickers)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OhlcvPanel):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.dates == other.dates
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in FIELDS)
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def n_bars(self) -> int:
        return len(self.dates) * len(self.tickers)

    def date_index(self, date: dt.date) -> int:
        try:
            return self._date_index[date]  # type: ignore[attr-defined]
        except KeyError:
            raise OutOfRange(f"{date} is not a trading day in this panel") from None

    def ticker_index(self, ticker: str) -> int:
        try:
            return self._ticker_index[ticker]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown ticker {ticker!r}") from None

    def field(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    def bar(self, ticker: str, date: dt.date) -> OhlcvBar:
        i, j = self.date_index(date), self.ticker_index(ticker)
        return OhlcvBar(date, *(float(getattr(self, f)[i, j]) for f in FIELDS))

    def slice_rows(self, start: int, stop: int) -> OhlcvPanel:
        return OhlcvPanel(
            self.tickers,
            self.dates[start:stop],
            *(getattr(self, f)[start:stop] for f in FIELDS),
        )

    def select_dates(self, first: dt.date, last: dt.date) -> OhlcvPanel:
        """Sub-panel with dates in the inclusive range [first, last]."""
        rows = [i for i, d in enumerate(self.dates) if first <= d <= last]
        if not rows:
            return self.slice_rows(0, 0)
        return self.slice_rows(rows[0], rows[-1] + 1)

    def select_tickers(self, tickers: Iterable[str]) -> OhlcvPanel:
        keep = sorted(set(tickers))
        cols = [self.ticker_index(t) for t in keep]
        return OhlcvPanel(
            tuple(keep), self.dates, *(getattr(self, f)[:, cols] for f in FIELDS)
        )


def panel_from_bars(bars: dict[tuple[str, dt.date], OhlcvBar]) -> OhlcvPanel:
    """Build an aligned panel from a (ticker, date) -> bar mapping.

    Every ticker must cover the union calendar; gaps raise MisalignedCalendar.
    """
    for (ticker, _), bar in bars.items():
        check_bar(ticker, bar)
    tickers = sorted({t for t, _ in bars})
    dates = sorted({d for _, d in bars})
    for t in tickers:
        missing = [d for d in dates if (t, d) not in bars]
        if missing:
            raise MisalignedCalendar(t, missing)
    arrays = {f: np.empty((len(dates), len(tickers))) for f in FIELDS}
    for j, t in enumerate(tickers):
        for i, d in enumerate(dates):
            bar = bars[(t, d)]
            for f in FIELDS:
                arrays[f][i, j] = getattr(bar, f)
    return OhlcvPanel(tuple(tickers), tuple(dates), **arrays)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedRow(line, f"column {column!r}: not a number: {text!r}") from None


def load_panel(path: str | Path) -> OhlcvPanel:
    """Load a long-form OHLCV CSV (header ``ticker,date,open,high,low,close,volume``)."""
    bars: dict[tuple[str, dt.date], OhlcvBar] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise MalformedRow(1, f"header must be {','.join(COLUMNS)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise MalformedRow(line, f"expected {len(COLUMNS)} fields, got {len(row)}")
            ticker = row[0].strip()
            if not ticker:
                raise MalformedRow(line, "empty ticker")
            try:
                date = dt.date.fromisoformat(row[1].strip())
            except ValueError:
                raise MalformedRow(line, f"bad date {row[1]!r}") from None
            if (ticker, date) in bars:
                raise MalformedRow(line, f"duplicate row for ({ticker}, {date.isoformat()})")
            values = [_parse_float(v.strip(), line, c) for v, c in zip(row[2:], COLUMNS[2:])]
            bar = OhlcvBar(date, *values)
            check_bar(ticker, bar)
            bars[(ticker, date)] = bar
    return panel_from_bars(bars)


def write_panel(panel: OhlcvPanel, path: str | Path) -> None:
    """Write the panel in the same CSV layout load_panel reads (exact float repr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for j, t in enumerate(panel.tickers):
            for i, d in enumerate(panel.dates):
                writer.writerow(
                    [t, d.isoformat()] + [repr(float(getattr(panel, f)[i, j])) for f in FIELDS]
                )


@dataclass(frozen=True)
class DateRange:
    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"range end {self.end} precedes start {self.start}")

    def __contains__(self, date: object) -> bool:
        return isinstance(date, dt.date) and self.start <= date <= self.end


@dataclass(frozen=True)
class DatasetSplit:
    train: DateRange
    valid: DateRange
    test: DateRange

    def __post_init__(self) -> None:
        if not (self.train.end < self.valid.start and self.valid.end < self.test.start):
            raise ValueError("split ranges must be ordered train < valid < test and disjoint")

    @classmethod
    def from_strings(cls, train: tuple[str, str], valid: tuple[str, str], test: tuple[str, str]) -> DatasetSplit:
        def rng(pair: tuple[str, str]) -> DateRange:
            return DateRange(dt.date.fromisoformat(pair[0]), dt.date.fromisoformat(pair[1]))

        return cls(rng(train), rng(valid), rng(test))


# Chronological split used for the 2020-2023 S&P 500 study.
DEFAULT_SPLIT = DatasetSplit.from_strings(
    ("2020-01-01", "2022-06-30"),
    ("2022-07-01", "2022-12-31"),
    ("2023-01-01", "2023-12-31"),
)


def split_chronological(
    panel: OhlcvPanel, split: DatasetSplit = DEFAULT_SPLIT
) -> tuple[OhlcvPanel, OhlcvPanel, OhlcvPanel]:
    parts = []
    for name in ("train", "valid", "test"):
        r: DateRange = getattr(split, name)
        part = panel.select_dates(r.start, r.end)
        if len(part) == 0:
            raise EmptySplit(f"{name} range {r.start}..{r.end} contains no trading days")
        parts.append(part)
    return parts[0], parts[1], parts[2]


def movement_label(panel: OhlcvPanel, ticker: str, date: dt.date, horizon_days: int = 1) -> MovementLabel:
    """Rise iff close(t + D) > close(t); ties are Fall."""
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    i = panel.date_index(date)
    j = panel.ticker_index(ticker)
    if i + horizon_days >= len(panel.dates):
        raise OutOfRange(f"{date} + {horizon_days} trading days is beyond the panel calendar")
    return MovementLabel.RISE if panel.close[i + horizon_days, j] > panel.close[i, j] else MovementLabel.FALL
