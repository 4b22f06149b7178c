"""Close-price statistics for the market-analyst prompt."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class WindowTooShort(ValueError):
    pass


@dataclass(frozen=True)
class StatsSummary:
    min_close: tuple[float, int]
    max_close: tuple[float, int]
    median_close: tuple[float, int]
    trend: str  # "upward" | "downward"
    window: int

    def __post_init__(self) -> None:
        if self.trend not in ("upward", "downward"):
            raise ValueError(f"trend must be upward or downward, got {self.trend!r}")


def _most_recent(values: Sequence[float], target: float) -> int:
    return max(i for i, v in enumerate(values) if v == target)


def summarize(closes: Sequence[float], asof_index: int | None = None, length: int | None = None) -> StatsSummary:
    """Min/max/median close with days-ago offsets and the least-squares trend.

    The window is the ``length`` bars ending at ``asof_index`` (default: the
    last bar, and every bar up to it). Days ago count trading days back from
    the as-of bar (0 = as-of day); ties resolve to the most recent bar. The
    median is the lower median for even windows; a zero slope counts as upward.
    """
    values = [float(v) for v in closes]
    end = len(values) - 1 if asof_index is None else asof_index
    if not 0 <= end < len(values):
        raise IndexError(f"asof_index {asof_index} outside series of length {len(values)}")
    start = 0 if length is None else end - length + 1
    if start < 0:
        raise WindowTooShort(f"need {length} bars ending at index {end}, have {end + 1}")
    window = values[start : end + 1]
    t = len(window)
    if t < 2:
        raise WindowTooShort(f"need at least 2 closes, got {t}")
    if not all(math.isfinite(v) for v in window):
        raise ValueError("closes must be finite")
    last = t - 1
    lo, hi = min(window), max(window)
    med = sorted(window)[(t - 1) // 2]
    x = np.arange(t, dtype=float)
    xc = x - x.mean()
    y = np.asarray(window)
    slope = float((xc * (y - y.mean())).sum() / (xc * xc).sum())
    return StatsSummary(
        min_close=(lo, last - _most_recent(window, lo)),
        max_close=(hi, last - _most_recent(window, hi)),
        median_close=(med, last - _most_recent(window, med)),
        trend="upward" if slope >= 0 else "downward",
        window=t,
    )


TEMPLATE = (
    "The historical prices have a minimum close of {min_val} {min_d} days ago, "
    "a maximum close of {max_val} {max_d} days ago, and a median close of "
    "{median_val} {median_d} days ago. The overall trend is {trend}..."
)

_PRICE = r"\$(-?\d+\.\d{2})"
PATTERN = re.compile(
    r"^The historical prices have a minimum close of " + _PRICE + r" (\d+) days ago, "
    r"a maximum close of " + _PRICE + r" (\d+) days ago, and a median close of "
    + _PRICE + r" (\d+) days ago\. The overall trend is (upward|downward)\.\.\.$"
)


def render_text(summary: StatsSummary) -> str:
    return TEMPLATE.format(
        min_val=f"${summary.min_close[0]:.2f}",
        min_d=summary.min_close[1],
        max_val=f"${summary.max_close[0]:.2f}",
        max_d=summary.max_close[1],
        median_val=f"${summary.median_close[0]:.2f}",
        median_d=summary.median_close[1],
        trend=summary.trend,
    )


def parse_text(text: str) -> dict[str, float | int | str]:
    """Inverse of render_text for the numeric slots (prices at 2 decimals)."""
    m = PATTERN.match(text)
    if m is None:
        raise ValueError("text does not match the statistics template")
    return {
        "min_val": float(m.group(1)),
        "min_d": int(m.group(2)),
        "max_val": float(m.group(3)),
        "max_d": int(m.group(4)),
        "median_val": float(m.group(5)),
        "median_d": int(m.group(6)),
        "trend": m.group(7),
    }
