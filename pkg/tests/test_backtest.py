from __future__ import annotations

import csv
import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from expertrade import oracles
from expertrade.backtest import (
    InvalidReturn,
    MissingBar,
    MissingRanking,
    StrategyConfig,
    ZeroVolatility,
    annualized_return,
    annualized_vol,
    curve_from_returns,
    max_drawdown,
    run_topk,
    sharpe,
)
from expertrade.market_data import load_panel
from expertrade.synthetic import fixture_dir

returns_st = st.lists(st.floats(-0.2, 0.2, allow_nan=False), min_size=2, max_size=300)


def test_annualized_return_closed_forms():
    assert annualized_return([0.0] * 252) == 0.0
    assert annualized_return([0.001] * 252) == pytest.approx(1.001**252 - 1, rel=1e-12)
    assert annualized_return([0.002] * 126) == pytest.approx((1.002**126) ** 2 - 1, rel=1e-12)
    with pytest.raises(InvalidReturn):
        annualized_return([0.01, -1.0])


def test_annualized_vol():
    assert annualized_vol([0.01] * 10) == 0.0
    with pytest.raises(ValueError):
        annualized_vol([0.01])
    r = [0.01, -0.02, 0.005, 0.0]
    assert annualized_vol(r) == pytest.approx(oracles.two_pass_std(r) * math.sqrt(252), rel=1e-12)


def test_sharpe_examples():
    assert sharpe(0.4979, 0.0995) == pytest.approx(5.004, abs=5e-4)
    assert sharpe(0.03, 0.2, rf=0.03) == 0.0
    with pytest.raises(ZeroVolatility):
        sharpe(0.1, 0.0)


def test_max_drawdown_examples():
    assert max_drawdown([1.0, 1.1, 1.2, 1.5]) == 0.0
    assert max_drawdown([1.0, 1.25, 1.0]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        max_drawdown([])


@settings(max_examples=100, deadline=None)
@given(returns_st)
def test_metrics_match_oracles(r):
    curve = curve_from_returns(r)
    assert annualized_return(r) == pytest.approx(oracles.annualized_return_loop(r), rel=1e-9, abs=1e-12)
    assert annualized_vol(r) == pytest.approx(oracles.two_pass_std(r) * math.sqrt(252), rel=1e-9, abs=1e-15)
    md = max_drawdown(curve)
    assert md == pytest.approx(oracles.max_drawdown_quadratic(list(curve)), abs=1e-12)
    assert 0.0 <= md <= 1.0
    np.testing.assert_allclose(curve[1:] / curve[:-1] - 1.0, r, atol=1e-12)
    for cut in (1, len(curve) // 2):
        assert max_drawdown(curve[:cut]) <= md


def test_k1_arithmetic():
    panel = make_panel([[100.0, 50.0], [101.0, 50.0], [102.01, 50.0]])
    rankings = {d: ["T00", "T01"] for d in panel.dates[:-1]}
    res = run_topk(panel, rankings, StrategyConfig(k=1))
    np.testing.assert_allclose(res.returns, [0.01, 0.01], rtol=1e-12)
    assert res.curve[-1] == pytest.approx(1.0201, rel=1e-12)
    assert res.holdings == (("T00",), ("T00",))


def test_equal_weight_identity(rng):
    closes = 100 * np.exp(rng.normal(0, 0.01, size=(20, 6)).cumsum(axis=0))
    panel = make_panel(closes)
    rankings = {d: list(panel.tickers) for d in panel.dates[:-1]}
    res = run_topk(panel, rankings, StrategyConfig(k=6))
    np.testing.assert_allclose(res.returns, (closes[1:] / closes[:-1] - 1).mean(axis=1), rtol=1e-12)


def test_cash_neutral_identity():
    closes = np.array([[10.0, 20.0, 5.0], [10.5, 21.0, 5.25], [10.5, 21.0, 5.25]])
    panel = make_panel(closes)
    rankings = {d: ["T02", "T00", "T01"] for d in panel.dates[:-1]}
    res = run_topk(panel, rankings, StrategyConfig(k=2))
    np.testing.assert_allclose(res.returns, [0.05, 0.0], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(1, 5))
def test_cost_monotonicity_and_simulator_oracle(seed, k):
    rng = np.random.default_rng(seed)
    closes = 50 * np.exp(rng.normal(0, 0.02, size=(30, 6)).cumsum(axis=0))
    panel = make_panel(closes)
    rankings = {d: list(rng.permutation(panel.tickers)) for d in panel.dates[:-1]}
    ars = []
    for cost in (0.0, 0.001, 0.01):
        res = run_topk(panel, rankings, StrategyConfig(k=k, cost_rate=cost))
        sim = oracles.simulate_topk(
            {t: list(closes[:, j]) for j, t in enumerate(panel.tickers)}, [rankings[d] for d in panel.dates[:-1]], k, cost
        )
        np.testing.assert_allclose(res.returns, sim, rtol=1e-12, atol=1e-15)
        ars.append(res.ar)
    assert ars[0] >= ars[1] >= ars[2]


def test_fewer_than_k_holds_all(caplog):
    panel = make_panel([[10.0, 10.0], [11.0, 12.0]])
    res = run_topk(panel, {panel.dates[0]: ["T01", "ZZZ"]}, StrategyConfig(k=3))
    assert res.holdings == (("T01",),)
    assert "only 1 rankable" in caplog.text


def test_errors():
    panel = make_panel([[10.0], [11.0], [12.0]])
    with pytest.raises(MissingRanking) as err:
        run_topk(panel, {panel.dates[0]: ["T00"]}, StrategyConfig(k=1))
    assert err.value.date == panel.dates[1]
    closes = np.array([[10.0], [np.nan]])
    with pytest.raises(MissingBar):
        run_topk(make_panel(closes), {dt.date(2023, 1, 2): ["T00"]}, StrategyConfig(k=1))
    with pytest.raises(ValueError):
        StrategyConfig(k=0)
    with pytest.raises(ValueError):
        StrategyConfig(cost_rate=1.0)


def test_fixture_year_matches_day_by_day_simulator(tmp_path):
    panel = load_panel(fixture_dir() / "panel.csv")
    test_dates = [d for d in panel.dates if d.year == 2023]
    rng = np.random.default_rng(99)
    rankings = {d: list(rng.permutation(panel.tickers)) for d in test_dates[:-1]}
    res = run_topk(panel, rankings, StrategyConfig(k=3), test_dates)
    rows = [panel.date_index(d) for d in test_dates]
    closes = {t: list(panel.close[rows, j]) for j, t in enumerate(panel.tickers)}
    sim = oracles.simulate_topk(closes, [rankings[d] for d in test_dates[:-1]], 3)
    np.testing.assert_allclose(res.curve, curve_from_returns(sim), rtol=1e-12, atol=0)
    out = tmp_path / "curve.csv"
    res.to_csv(out)
    with open(out) as fh:
        table = list(csv.DictReader(fh))
    assert list(table[0]) == ["date", "portfolio_return", "cumulative", "holdings"]
    assert len(table) == len(test_dates) and table[0]["cumulative"] == "1.0"
    assert len(table[1]["holdings"].split(";")) == 3
