"""Slow reference implementations used to cross-check the fast code paths.

Each function here is written from the definition with plain Python loops
and deliberately shares no helpers with the production modules. Where a
floating-point summation order matters (sums feeding ranks or ties), the
loops accumulate in the documented order: oldest to newest, except the
linear decay which starts from the newest bar.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .alpha.expr import BASE_FIELDS, TS_KINDS, Binary, Corr, Expr, Field, Literal, Rank, TsOp, Unary

NAN = math.nan


def _finite(v: float) -> float:
    return v if math.isfinite(v) else NAN


# ---------------------------------------------------------------------------
# alpha expressions


def _grid(t: int, n: int, value: float = NAN) -> list[list[float]]:
    return [[value] * n for _ in range(t)]


def _window(col: list[float], end: int, w: int) -> list[float] | None:
    if end - w + 1 < 0:
        return None
    vals = col[end - w + 1 : end + 1]
    if any(math.isnan(v) for v in vals):
        return None
    return vals


def _seq_sum(vals: Sequence[float]) -> float:
    acc = 0.0
    first = True
    for v in vals:
        acc = v if first else acc + v
        first = False
    return acc


def _ts_scalar(kind: str, vals: list[float], w: int) -> float:
    if kind == "ts_min":
        return min(vals)
    if kind == "ts_max":
        return max(vals)
    if kind == "ts_argmax":
        best = 0
        for i, v in enumerate(vals):
            if v > vals[best]:
                best = i
        return float(best)
    if kind == "ts_argmin":
        best = 0
        for i, v in enumerate(vals):
            if v < vals[best]:
                best = i
        return float(best)
    if kind == "ts_rank":
        cur = vals[-1]
        less = sum(1 for v in vals if v < cur)
        equal = sum(1 for v in vals if v == cur)
        return (2.0 * less + equal + 1.0) / (2.0 * w)
    if kind == "sum":
        return _seq_sum(vals)
    if kind == "mean":
        return _seq_sum(vals) / w
    if kind == "stddev":
        mean = _seq_sum(vals) / w
        acc = 0.0
        for v in vals:
            acc = acc + (v - mean) * (v - mean)
        return math.sqrt(acc / (w - 1))
    if kind == "decay_linear":
        acc = 0.0
        for i in range(w):
            acc = acc + vals[w - 1 - i] * float(w - i)
        return acc / (w * (w + 1) / 2.0)
    raise ValueError(kind)


def _naive(node: Expr, cols: Mapping[str, list[list[float]]], t: int, n: int) -> list[list[float]]:
    if isinstance(node, Literal):
        return _grid(t, n, float(node.value))
    if isinstance(node, Field):
        if node.name == "adv":
            vol = cols["volume"]
            out = _grid(t, n)
            for j in range(n):
                col = [vol[i][j] for i in range(t)]
                for i in range(t):
                    vals = _window(col, i, node.window)
                    if vals is not None:
                        out[i][j] = _seq_sum(vals) / node.window
            return out
        if node.name == "vwap":
            return [[(cols["high"][i][j] + cols["low"][i][j] + cols["close"][i][j]) / 3.0 for j in range(n)] for i in range(t)]
        return [row[:] for row in cols[node.name]]
    if isinstance(node, Unary):
        x = _naive(node.arg, cols, t, n)
        out = _grid(t, n)
        for i in range(t):
            for j in range(n):
                v = x[i][j]
                if math.isnan(v):
                    continue
                if node.op == "neg":
                    out[i][j] = -v
                elif node.op == "abs":
                    out[i][j] = abs(v)
                else:
                    out[i][j] = math.log(v) if v > 0 else NAN
        return out
    if isinstance(node, Binary):
        a = _naive(node.left, cols, t, n)
        b = _naive(node.right, cols, t, n)
        out = _grid(t, n)
        for i in range(t):
            for j in range(n):
                x, y = a[i][j], b[i][j]
                if math.isnan(x) or math.isnan(y):
                    continue
                if node.op == "+":
                    r = x + y
                elif node.op == "-":
                    r = x - y
                elif node.op == "*":
                    r = x * y
                else:
                    r = NAN if y == 0 else x / y
                out[i][j] = _finite(r)
        return out
    if isinstance(node, Rank):
        x = _naive(node.arg, cols, t, n)
        out = _grid(t, n)
        for i in range(t):
            finite = [v for v in x[i] if not math.isnan(v)]
            for j in range(n):
                v = x[i][j]
                if math.isnan(v):
                    continue
                less = sum(1 for u in finite if u < v)
                equal = sum(1 for u in finite if u == v)
                out[i][j] = (2.0 * less + equal + 1.0) / (2.0 * len(finite))
        return out
    if isinstance(node, TsOp):
        x = _naive(node.arg, cols, t, n)
        out = _grid(t, n)
        w = node.window
        for j in range(n):
            col = [x[i][j] for i in range(t)]
            for i in range(t):
                if node.kind == "delta":
                    if i - w >= 0 and not math.isnan(col[i]) and not math.isnan(col[i - w]):
                        out[i][j] = _finite(col[i] - col[i - w])
                    continue
                vals = _window(col, i, w)
                if vals is not None:
                    out[i][j] = _finite(_ts_scalar(node.kind, vals, w))
        return out
    if isinstance(node, Corr):
        a = _naive(node.left, cols, t, n)
        b = _naive(node.right, cols, t, n)
        out = _grid(t, n)
        w = node.window
        for j in range(n):
            ca = [a[i][j] for i in range(t)]
            cb = [b[i][j] for i in range(t)]
            for i in range(t):
                xa, xb = _window(ca, i, w), _window(cb, i, w)
                if xa is None or xb is None:
                    continue
                if max(xa) == min(xa) or max(xb) == min(xb):
                    continue
                ma, mb = _seq_sum(xa) / w, _seq_sum(xb) / w
                sab = saa = sbb = 0.0
                for u, v in zip(xa, xb):
                    sab = sab + (u - ma) * (v - mb)
                    saa = saa + (u - ma) * (u - ma)
                    sbb = sbb + (v - mb) * (v - mb)
                denom = math.sqrt(saa * sbb)
                if denom == 0 or not math.isfinite(denom):
                    r = NAN if denom == 0 else 0.0
                else:
                    r = sab / denom
                out[i][j] = _finite(min(1.0, max(-1.0, r))) if math.isfinite(r) else NAN
        return out
    raise TypeError(node)


def naive_evaluate(node: Expr, fields: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate over (T, N) arrays keyed open/high/low/close/volume."""
    t, n = np.asarray(fields["close"]).shape
    cols = {k: np.asarray(v, dtype=float).tolist() for k, v in fields.items()}
    return np.array(_naive(node, cols, t, n), dtype=float)


def random_expr(rng: np.random.Generator, depth: int = 3, max_window: int = 5) -> Expr:
    """Random well-formed expression drawn from the full grammar."""
    if depth <= 0 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.15:
            return Literal(float(rng.integers(1, 10)) if rng.random() < 0.5 else round(float(rng.uniform(0.1, 5.0)), 3))
        if r < 0.25:
            return Field("adv", int(rng.integers(2, max_window + 1)))
        return Field(BASE_FIELDS[int(rng.integers(len(BASE_FIELDS)))])
    choice = rng.random()
    sub = lambda: random_expr(rng, depth - 1, max_window)  # noqa: E731
    if choice < 0.15:
        op = ("neg", "abs", "log")[int(rng.integers(3))]
        arg = sub()
        if op == "neg" and isinstance(arg, Literal):
            # the parser folds a minus sign into a literal
            return Literal(-arg.value)
        return Unary(op, arg)
    if choice < 0.40:
        return Binary("+-*/"[int(rng.integers(4))], sub(), sub())
    if choice < 0.55:
        return Rank(sub())
    if choice < 0.90:
        kind = TS_KINDS[int(rng.integers(len(TS_KINDS)))]
        lo = 2 if kind == "stddev" else 1
        return TsOp(kind, sub(), int(rng.integers(lo, max_window + 1)))
    return Corr(sub(), sub(), int(rng.integers(2, max_window + 1)))


def random_fields(rng: np.random.Generator, t: int, n: int) -> dict[str, np.ndarray]:
    close = 50.0 * np.exp(np.cumsum(rng.normal(0, 0.02, size=(t, n)), axis=0))
    open_ = close * np.exp(rng.normal(0, 0.01, size=(t, n)))
    high = np.maximum(open_, close) * (1 + np.abs(rng.normal(0, 0.01, size=(t, n))))
    low = np.minimum(open_, close) * (1 - np.abs(rng.normal(0, 0.01, size=(t, n))))
    volume = np.round(np.exp(rng.normal(10, 0.5, size=(t, n))))
    # a few exact ties exercise the average-rank and constant-window rules
    close[t // 2, : max(1, n // 2)] = close[t // 2, 0]
    return {"open": open_, "high": high, "low": low, "close": close, "volume": volume}


# ---------------------------------------------------------------------------
# reprogramming


def naive_reprogram(patches: np.ndarray, prototypes: np.ndarray, w_q, w_k, w_v, w_out, n_heads: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-head, per-query loop version of the cross-attention block."""
    n, lp, _ = patches.shape
    v_count = prototypes.shape[0]
    dk = w_q.shape[1] // n_heads
    out = np.zeros((n, lp, w_out.shape[1]))
    attn = np.zeros((n_heads, n, lp, v_count))
    for a in range(n):
        for p in range(lp):
            heads = []
            for h in range(n_heads):
                sl = slice(h * dk, (h + 1) * dk)
                q = patches[a, p] @ w_q[:, sl]
                scores = np.array([q @ (prototypes[v] @ w_k[:, sl]) / math.sqrt(dk) for v in range(v_count)])
                e = np.exp(scores - scores.max())
                weights = e / e.sum()
                attn[h, a, p] = weights
                z = sum(weights[v] * (prototypes[v] @ w_v[:, sl]) for v in range(v_count))
                heads.append(z)
            out[a, p] = np.concatenate(heads) @ w_out
    return out, attn


# ---------------------------------------------------------------------------
# statistics


def spearman_bruteforce(x: Sequence[float], y: Sequence[float]) -> float:
    def ranks(v: Sequence[float]) -> list[float]:
        out = []
        for a in v:
            less = sum(1 for b in v if b < a)
            equal = sum(1 for b in v if b == a)
            out.append(less + (equal + 1) / 2.0)
        return out

    rx, ry = ranks(x), ranks(y)
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def max_drawdown_quadratic(curve: Sequence[float]) -> float:
    worst = 0.0
    for j in range(len(curve)):
        for i in range(j + 1):
            worst = max(worst, (curve[i] - curve[j]) / curve[i])
    return worst


def two_pass_std(values: Sequence[float]) -> float:
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


def annualized_return_loop(returns: Sequence[float], days: int = 252) -> float:
    growth = 1.0
    for r in returns:
        growth *= 1.0 + r
    return math.exp(math.log(growth) * days / len(returns)) - 1.0


def mcc_definition(tp: int, tn: int, fp: int, fn: int) -> float:
    n = tp + tn + fp + fn
    s = (tp + fn) / n
    p = (tp + fp) / n
    denom = math.sqrt(p * s * (1 - s) * (1 - p))
    return 0.0 if denom == 0 else (tp / n - s * p) / denom


def simulate_topk(closes: Mapping[str, Sequence[float]], rankings: Sequence[Sequence[str]], k: int, cost: float = 0.0) -> list[float]:
    """Day-by-day portfolio returns for an equal-weight Top-K strategy."""
    returns = []
    prev: dict[str, float] = {}
    for day, ranking in enumerate(rankings):
        held = [t for t in ranking if t in closes][:k]
        w = 1.0 / len(held)
        gross = 0.0
        for t in held:
            gross += w * (closes[t][day + 1] / closes[t][day] - 1.0)
        now = {t: w for t in held}
        turnover = 0.0
        for t in set(now) | set(prev):
            turnover += abs(now.get(t, 0.0) - prev.get(t, 0.0))
        returns.append(gross - cost * turnover)
        prev = now
    return returns
