"""Quick cross-checks of the fast implementations against the reference oracles."""

from __future__ import annotations

import datetime as dt
import math
from typing import Callable

import numpy as np

from . import oracles
from .alpha import bundled_library_path, evaluate_panel, load_library, parse, to_string
from .backtest import annualized_return, annualized_vol, max_drawdown, run_topk, StrategyConfig, sharpe
from .market_data import OhlcvPanel
from .metrics import ConfusionMatrix, accuracy, mcc
from .ranking import CountingComparator, rank_ic, relaxed_sort
from .reprogram import PatchConfig, Reprogrammer, instance_normalize, make_patches
from .rng import substream

Check = tuple[str, bool, str]
RTOL = 1e-9


def _close(a: float, b: float, rtol: float = RTOL, atol: float = 1e-12) -> bool:
    return abs(a - b) <= atol + rtol * abs(b)


def check_metrics(seed: int, cases: int = 100) -> Check:
    rng = substream(seed, "selftest.metrics")
    worst = 0.0
    for _ in range(cases):
        r = rng.normal(0.0005, 0.015, size=int(rng.integers(20, 300)))
        curve = np.concatenate([[1.0], np.cumprod(1 + r)])
        pairs = [
            (annualized_return(r), oracles.annualized_return_loop(r)),
            (annualized_vol(r), oracles.two_pass_std(list(r)) * math.sqrt(252)),
            (max_drawdown(curve), oracles.max_drawdown_quadratic(list(curve))),
        ]
        counts = rng.integers(0, 60, size=4)
        cm = ConfusionMatrix(*(int(c) for c in counts))
        if cm.total:
            pairs.append((accuracy(cm), (cm.tp + cm.tn) / cm.total))
            pairs.append((mcc(cm), oracles.mcc_definition(cm.tp, cm.tn, cm.fp, cm.fn)))
        for got, want in pairs:
            if not _close(got, want):
                return ("metrics", False, f"{got!r} != {want!r}")
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    return ("metrics", True, f"{cases} cases, worst relative error {worst:.1e}")


def sharpe_rounding_interval(ar: float, av: float, decimals: int = 4) -> tuple[float, float]:
    """Range of Sharpe ratios compatible with AR and AV given to ``decimals`` places."""
    h = 0.5 * 10.0**-decimals
    return sharpe(ar - h, av + h), sharpe(ar + h, av - h)


def check_sharpe_table(seed: int) -> Check:
    point = sharpe(0.4979, 0.0995)
    lo, hi = sharpe_rounding_interval(0.4979, 0.0995)
    ok = lo < 5.015 and hi >= 5.005
    return ("sharpe-rounding", ok, f"point {point:.4f}, compatible range [{lo:.4f}, {hi:.4f}] vs 5.01")


def _panel(fields: dict[str, np.ndarray]) -> OhlcvPanel:
    t, n = fields["close"].shape
    return OhlcvPanel(
        tuple(f"T{j:02d}" for j in range(n)),
        tuple(dt.date(2021, 1, 1) + dt.timedelta(days=i) for i in range(t)),
        **fields,
    )


def check_alpha(seed: int, cases: int = 200) -> Check:
    rng = substream(seed, "selftest.alpha")
    for rec in load_library(bundled_library_path()):
        if parse(to_string(rec.expression)) != rec.expression:
            return ("alpha-dsl", False, f"round trip failed for alpha {rec.id}")
    for _ in range(cases):
        fields = oracles.random_fields(rng, 24, 5)
        expr = oracles.random_expr(rng, 3)
        if parse(to_string(expr)) != expr:
            return ("alpha-dsl", False, f"round trip failed: {to_string(expr)}")
        fast = evaluate_panel(expr, _panel(fields))
        slow = oracles.naive_evaluate(expr, fields)
        if not np.allclose(fast, slow, rtol=RTOL, atol=1e-12, equal_nan=True):
            return ("alpha-dsl", False, f"mismatch on {to_string(expr)}")
    return ("alpha-dsl", True, f"{cases} random expressions and the bundled library")


def check_ranking(seed: int) -> Check:
    rng = substream(seed, "selftest.ranking")
    for n in (1, 2, 5, 30, 60):
        tickers = [f"S{i:03d}" for i in range(n)]
        quality = dict(zip(tickers, rng.permutation(n)))
        counter = CountingComparator(lambda a, b: quality[a] > quality[b])
        result = relaxed_sort(list(rng.permutation(tickers)), counter)
        if counter.calls != n * (n - 1) // 2:
            return ("ranking", False, f"N={n}: {counter.calls} calls")
        if list(result.order) != sorted(tickers, key=lambda t: -quality[t]):
            return ("ranking", False, f"N={n}: order not recovered")
    x = rng.normal(size=20)
    y = x + rng.normal(size=20)
    names = [f"S{i}" for i in range(20)]
    order = [names[i] for i in np.argsort(-x, kind="stable")]
    got = rank_ic(order, dict(zip(names, y)))
    want = oracles.spearman_bruteforce(list(-np.arange(20.0)), [dict(zip(names, y))[t] for t in order])
    if not _close(got, want, 1e-12):
        return ("ranking", False, f"rank_ic {got} != {want}")
    return ("ranking", True, "C(N,2) calls and exact recovery for N up to 60; Spearman oracle")


def check_reprogram(seed: int, configs: int = 10) -> Check:
    rng = substream(seed, "selftest.reprogram")
    for c in range(configs):
        cfg = PatchConfig(d_model=16, n_heads=int(rng.choice([1, 2, 4])), d_llm=24)
        rp = Reprogrammer.default(seed + c, cfg, v_prime=8)
        window = rng.normal(100, 5, size=(cfg.n_vars, cfg.window))
        emb = rp.encode(window)
        if not np.allclose(emb.attention.sum(axis=-1), 1.0, atol=1e-6):
            return ("reprogram", False, "attention rows do not sum to 1")
        patches = make_patches(instance_normalize(window), cfg) @ rp.weights.patch_proj
        w = rp.weights
        out, attn = oracles.naive_reprogram(patches, rp.bank.prototypes, w.w_q, w.w_k, w.w_v, w.w_out, cfg.n_heads)
        if not np.allclose(emb.output, out, rtol=RTOL, atol=1e-12):
            return ("reprogram", False, "output differs from per-head oracle")
        scaled = rp.encode(window * rng.uniform(0.5, 2.0, size=(cfg.n_vars, 1)) + 3.0)
        if not np.allclose(scaled.output, emb.output, rtol=RTOL, atol=1e-9):
            return ("reprogram", False, "not invariant to per-variable affine rescaling")
    return ("reprogram", True, f"{configs} seeded configurations")


def check_backtest(seed: int) -> Check:
    rng = substream(seed, "selftest.backtest")
    t, n = 60, 8
    fields = oracles.random_fields(rng, t, n)
    panel = _panel(fields)
    rankings = {d: list(rng.permutation(panel.tickers)) for d in panel.dates[:-1]}
    result = run_topk(panel, rankings, StrategyConfig(k=3, cost_rate=0.001))
    closes = {tk: list(fields["close"][:, j]) for j, tk in enumerate(panel.tickers)}
    expected = oracles.simulate_topk(closes, [rankings[d] for d in panel.dates[:-1]], 3, 0.001)
    if not np.allclose(result.returns, expected, rtol=1e-12, atol=1e-15):
        return ("backtest", False, "returns differ from the day-by-day simulator")
    return ("backtest", True, f"{t - 1} days, K=3, cost 10 bp")


CHECKS: tuple[Callable[[int], Check], ...] = (
    check_metrics,
    check_sharpe_table,
    check_alpha,
    check_ranking,
    check_reprogram,
    check_backtest,
)


def run_all(seed: int = 0) -> list[Check]:
    results = []
    for check in CHECKS:
        try:
            results.append(check(seed))
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            results.append((check.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}"))
    return results
