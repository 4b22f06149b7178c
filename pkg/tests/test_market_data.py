from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from expertrade.market_data import (
    DatasetSplit,
    EmptySplit,
    InvariantViolation,
    MalformedRow,
    MisalignedCalendar,
    MovementLabel,
    OhlcvPanel,
    OutOfRange,
    load_panel,
    movement_label,
    split_chronological,
    write_panel,
)
from expertrade.synthetic import business_days

HEADER = "ticker,date,open,high,low,close,volume\n"


def write(tmp_path, body):
    p = tmp_path / "panel.csv"
    p.write_text(HEADER + body)
    return p


def test_load_well_formed(tmp_path):
    rows = "".join(
        f"{t},2023-12-0{d},10,11,9,10.5,100\n" for t in ("AAPL", "MSFT") for d in (1, 4, 5)
    )
    panel = load_panel(write(tmp_path, rows))
    assert panel.tickers == ("AAPL", "MSFT")
    assert panel.n_bars == 6
    assert panel.bar("MSFT", dt.date(2023, 12, 4)).close == 10.5


@pytest.mark.parametrize(
    "row,rule",
    [
        ("AAPL,2023-12-01,10,9,11,10,100\n", "high"),
        ("AAPL,2023-12-01,10,12,9,13,100\n", "high"),
        ("AAPL,2023-12-01,0,12,0,10,100\n", "> 0"),
        ("AAPL,2023-12-01,10,12,9,10,-1\n", "volume"),
    ],
)
def test_invariant_violations(tmp_path, row, rule):
    with pytest.raises(InvariantViolation) as err:
        load_panel(write(tmp_path, row))
    assert err.value.ticker == "AAPL"
    assert rule in err.value.rule


def test_duplicate_and_malformed_rows(tmp_path):
    row = "AAPL,2023-12-01,10,11,9,10,100\n"
    with pytest.raises(MalformedRow) as err:
        load_panel(write(tmp_path, row + row))
    assert err.value.line == 3 and "duplicate" in err.value.reason
    with pytest.raises(MalformedRow, match="line 2"):
        load_panel(write(tmp_path, "AAPL,2023-12-01,10,eleven,9,10,100\n"))
    with pytest.raises(MalformedRow, match="bad date"):
        load_panel(write(tmp_path, "AAPL,12/01/2023,10,11,9,10,100\n"))
    bad = tmp_path / "bad.csv"
    bad.write_text("ticker,date,close\n")
    with pytest.raises(MalformedRow, match="header"):
        load_panel(bad)


def test_missing_day_is_an_error(tmp_path):
    rows = "AAPL,2023-12-01,10,11,9,10,1\nAAPL,2023-12-04,10,11,9,10,1\nMSFT,2023-12-01,10,11,9,10,1\n"
    with pytest.raises(MisalignedCalendar) as err:
        load_panel(write(tmp_path, rows))
    assert err.value.ticker == "MSFT" and err.value.missing == (dt.date(2023, 12, 4),)


def test_csv_round_trip(tmp_path, rng):
    closes = 50 + rng.normal(0, 1, size=(12, 3)).cumsum(axis=0)
    panel = make_panel(closes)
    path = tmp_path / "out.csv"
    write_panel(panel, path)
    assert load_panel(path) == panel


def four_year_panel():
    days = business_days(dt.date(2020, 1, 1), dt.date(2023, 12, 31))
    fields = {f: np.full((len(days), 1), 10.0) for f in ("open", "high", "low", "close", "volume")}
    return OhlcvPanel(("X",), tuple(days), **fields)


def test_default_split_partitions_four_years():
    panel = four_year_panel()
    train, valid, test = split_chronological(panel)
    assert train.dates[0] == dt.date(2020, 1, 1) and train.dates[-1] == dt.date(2022, 6, 30)
    assert valid.dates[0] == dt.date(2022, 7, 1) and valid.dates[-1] == dt.date(2022, 12, 30)
    assert test.dates[-1] == dt.date(2023, 12, 29)
    assert len(train) + len(valid) + len(test) == len(panel)
    assert not (set(train.dates) & set(valid.dates)) and not (set(valid.dates) & set(test.dates))


def test_split_errors():
    panel = four_year_panel()
    late = DatasetSplit.from_strings(("2020-01-01", "2020-12-31"), ("2021-01-01", "2021-12-31"), ("2030-01-01", "2030-12-31"))
    with pytest.raises(EmptySplit):
        split_chronological(panel, late)
    one_day = make_panel([[10.0]], start=dt.date(2020, 1, 2))
    with pytest.raises(EmptySplit):
        split_chronological(one_day)
    with pytest.raises(ValueError):
        DatasetSplit.from_strings(("2020-01-01", "2021-01-01"), ("2020-06-01", "2021-12-31"), ("2022-01-01", "2022-12-31"))


def test_movement_label_examples():
    panel = make_panel([100.0, 101.0, 101.0])
    d0, d1 = panel.dates[:2]
    assert movement_label(panel, "T00", d0, 1) is MovementLabel.RISE
    assert movement_label(panel, "T00", d1, 1) is MovementLabel.FALL
    assert movement_label(panel, "T00", d0, 2) is MovementLabel.RISE
    with pytest.raises(OutOfRange):
        movement_label(panel, "T00", d1, 2)


def test_movement_label_matches_scan(rng):
    closes = np.round(100 + rng.normal(0, 1, size=30).cumsum(), 1)
    closes[5] = closes[4]
    panel = make_panel(closes)
    for d in (1, 3):
        for i in range(30 - d):
            expected = "Rise" if closes[i + d] > closes[i] else "Fall"
            assert movement_label(panel, "T00", panel.dates[i], d).value == expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1, 1000, allow_nan=False), min_size=2, max_size=40), st.integers(1, 5))
def test_label_rise_iff_strict_increase(closes, d):
    panel = make_panel(closes)
    for i in range(len(closes) - d):
        rise = movement_label(panel, "T00", panel.dates[i], d) is MovementLabel.RISE
        assert rise == (closes[i + d] > closes[i])
