"""Vectorized evaluation of alpha expressions over an OHLCV panel.

Every operator maps a (dates x tickers) array to another one. Time-series
windows are trailing and include the current bar; rows without a full window
are NaN. Non-finite arithmetic results (division by zero, log of a
non-positive number, overflow) become NaN and propagate.
"""

from __future__ import annotations

import datetime as dt

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..market_data import OhlcvPanel
from .expr import Binary, Corr, Expr, Field, Literal, Rank, TsOp, Unary, lookback


class InsufficientHistory(ValueError):
    def __init__(self, needed: int, available: int, what: str = "expression"):
        super().__init__(f"{what} needs {needed} bars of history, only {available} available")
        self.needed = needed
        self.available = available


def _finite_or_nan(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x[~np.isfinite(x)] = np.nan
    return x


def _rolling_sum(x: np.ndarray, w: int) -> np.ndarray:
    # Sequential accumulation oldest -> newest for reproducible rounding.
    out = np.full_like(x, np.nan)
    t = x.shape[0]
    if t < w:
        return out
    acc = x[0 : t - w + 1].copy()
    for k in range(1, w):
        acc = acc + x[k : t - w + 1 + k]
    out[w - 1 :] = acc
    return out


def _windows(x: np.ndarray, w: int) -> np.ndarray:
    """(T - w + 1, N, w) view of trailing windows, oldest first on the last axis."""
    return sliding_window_view(x, w, axis=0)


def _masked(x: np.ndarray, w: int, values: np.ndarray) -> np.ndarray:
    """Place per-window results at rows w-1.. and blank windows containing NaN."""
    out = np.full(x.shape, np.nan)
    if x.shape[0] < w:
        return out
    bad = np.isnan(_windows(x, w)).any(axis=-1)
    values = np.where(bad, np.nan, values)
    out[w - 1 :] = values
    return out


def ts_min(x: np.ndarray, w: int) -> np.ndarray:
    if x.shape[0] < w:
        return np.full(x.shape, np.nan)
    return _masked(x, w, _windows(x, w).min(axis=-1))


def ts_max(x: np.ndarray, w: int) -> np.ndarray:
    if x.shape[0] < w:
        return np.full(x.shape, np.nan)
    return _masked(x, w, _windows(x, w).max(axis=-1))


def ts_argmax(x: np.ndarray, w: int) -> np.ndarray:
    """0-based offset of the (first) maximum from the window start."""
    if x.shape[0] < w:
        return np.full(x.shape, np.nan)
    win = np.nan_to_num(_windows(x, w), nan=-np.inf)
    return _masked(x, w, win.argmax(axis=-1).astype(float))


def ts_argmin(x: np.ndarray, w: int) -> np.ndarray:
    if x.shape[0] < w:
        return np.full(x.shape, np.nan)
    win = np.nan_to_num(_windows(x, w), nan=np.inf)
    return _masked(x, w, win.argmin(axis=-1).astype(float))


def ts_rank(x: np.ndarray, w: int) -> np.ndarray:
    """Average-tie percentile of the current value within its window, in (0, 1]."""
    if x.shape[0] < w:
        return np.full(x.shape, np.nan)
    win = _windows(x, w)
    last = win[..., -1:]
    less = (win < last).sum(axis=-1)
    equal = (win == last).sum(axis=-1)
    return _masked(x, w, (2.0 * less + equal + 1.0) / (2.0 * w))


def ts_sum(x: np.ndarray, w: int) -> np.ndarray:
    return _rolling_sum(x, w)


def ts_mean(x: np.ndarray, w: int) -> np.ndarray:
    return _rolling_sum(x, w) / w


def stddev(x: np.ndarray, w: int) -> np.ndarray:
    """Sample standard deviation (ddof=1) over the trailing window."""
    out = np.full(x.shape, np.nan)
    t = x.shape[0]
    if t < w:
        return out
    mean = _rolling_sum(x, w)[w - 1 :] / w
    acc = np.zeros_like(mean)
    for k in range(w):
        d = x[k : t - w + 1 + k] - mean
        acc = acc + d * d
    out[w - 1 :] = np.sqrt(acc / (w - 1))
    return out


def delta(x: np.ndarray, d: int) -> np.ndarray:
    out = np.full(x.shape, np.nan)
    if x.shape[0] > d:
        out[d:] = x[d:] - x[:-d]
    return out


def decay_linear(x: np.ndarray, w: int) -> np.ndarray:
    """sum_{i=0}^{w-1} x[t-i] * (w - i) / (w (w + 1) / 2)."""
    out = np.full(x.shape, np.nan)
    t = x.shape[0]
    if t < w:
        return out
    acc = np.zeros((t - w + 1,) + x.shape[1:])
    for i in range(w):
        acc = acc + x[w - 1 - i : t - i] * float(w - i)
    out[w - 1 :] = acc / (w * (w + 1) / 2.0)
    return out


def corr(x: np.ndarray, y: np.ndarray, w: int) -> np.ndarray:
    """Trailing Pearson correlation; NaN when either window is constant."""
    out = np.full(x.shape, np.nan)
    t = x.shape[0]
    if t < w:
        return out
    wx, wy = _windows(x, w), _windows(y, w)
    mx = _rolling_sum(x, w)[w - 1 :] / w
    my = _rolling_sum(y, w)[w - 1 :] / w
    sxy = np.zeros_like(mx)
    sxx = np.zeros_like(mx)
    syy = np.zeros_like(mx)
    for k in range(w):
        dx = x[k : t - w + 1 + k] - mx
        dy = y[k : t - w + 1 + k] - my
        sxy = sxy + dx * dy
        sxx = sxx + dx * dx
        syy = syy + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sxy / np.sqrt(sxx * syy)
    constant = (wx.max(axis=-1) == wx.min(axis=-1)) | (wy.max(axis=-1) == wy.min(axis=-1))
    r = np.where(constant, np.nan, np.clip(r, -1.0, 1.0))
    bad = np.isnan(wx).any(axis=-1) | np.isnan(wy).any(axis=-1)
    out[w - 1 :] = np.where(bad, np.nan, _finite_or_nan(r))
    return out


def cs_rank(x: np.ndarray) -> np.ndarray:
    """Cross-sectional average-tie percentile rank per row, in (0, 1]; NaN entries stay NaN."""
    finite = np.isfinite(x)
    n = finite.sum(axis=1, keepdims=True).astype(float)
    col = x[:, :, None]
    row = x[:, None, :]
    less = (row < col).sum(axis=2)
    equal = (row == col).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (2.0 * less + equal + 1.0) / (2.0 * n)
    return np.where(finite, r, np.nan)


TS_FUNCS = {
    "ts_min": ts_min,
    "ts_max": ts_max,
    "ts_rank": ts_rank,
    "ts_argmax": ts_argmax,
    "ts_argmin": ts_argmin,
    "stddev": stddev,
    "sum": ts_sum,
    "mean": ts_mean,
    "delta": delta,
    "decay_linear": decay_linear,
}


def field_values(panel: OhlcvPanel, node: Field) -> np.ndarray:
    if node.name == "vwap":
        # daily proxy: typical price
        return (panel.high + panel.low + panel.close) / 3.0
    if node.name == "adv":
        assert node.window is not None
        return ts_mean(np.asarray(panel.volume, dtype=float), node.window)
    return np.array(panel.field(node.name), dtype=float)


def _eval(node: Expr, panel: OhlcvPanel) -> np.ndarray:
    shape = (len(panel.dates), len(panel.tickers))
    if isinstance(node, Literal):
        return np.full(shape, float(node.value))
    if isinstance(node, Field):
        return field_values(panel, node)
    if isinstance(node, Unary):
        x = _eval(node.arg, panel)
        with np.errstate(all="ignore"):
            if node.op == "neg":
                return -x
            if node.op == "abs":
                return np.abs(x)
            if node.op == "log":
                return _finite_or_nan(np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), np.nan))
        raise ValueError(f"unknown unary op {node.op!r}")
    if isinstance(node, Binary):
        a = _eval(node.left, panel)
        b = _eval(node.right, panel)
        with np.errstate(all="ignore"):
            if node.op == "+":
                r = a + b
            elif node.op == "-":
                r = a - b
            elif node.op == "*":
                r = a * b
            elif node.op == "/":
                r = np.where(b == 0, np.nan, a / np.where(b == 0, 1.0, b))
            else:
                raise ValueError(f"unknown binary op {node.op!r}")
        return _finite_or_nan(r)
    if isinstance(node, Rank):
        return cs_rank(_eval(node.arg, panel))
    if isinstance(node, TsOp):
        with np.errstate(all="ignore"):
            return _finite_or_nan(TS_FUNCS[node.kind](_eval(node.arg, panel), node.window))
    if isinstance(node, Corr):
        return corr(_eval(node.left, panel), _eval(node.right, panel), node.window)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_panel(expr: Expr, panel: OhlcvPanel) -> np.ndarray:
    """Values for every (date, ticker) of the panel; warm-up rows are NaN."""
    return _eval(expr, panel)


def evaluate(expr: Expr, panel: OhlcvPanel, date: dt.date) -> dict[str, float]:
    """Cross-section of ``expr`` on ``date``.

    Raises InsufficientHistory when the panel does not hold the full
    dependency window ending at ``date``.
    """
    i = panel.date_index(date)
    need = lookback(expr)
    if i < need:
        raise InsufficientHistory(need + 1, i + 1)
    row = _eval(expr, panel.slice_rows(i - need, i + 1))[-1]
    return {t: float(v) for t, v in zip(panel.tickers, row)}
