import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from copula_backtest.market_data import (DataError, PriceSeries, ReturnSeries,
                                         compute_returns, load_prices, synchronize_pair)


def test_load_three_rows(write_prices):
    p = load_prices(write_prices("a.csv", [("2020-01-01", 100), ("2020-01-02", 101.5),
                                           ("2020-01-03", 99)]))
    assert len(p) == 3
    assert p.asset_id == "a"
    assert p.dates[0] == "2020-01-01"


def test_zero_price_names_line(write_prices):
    path = write_prices("a.csv", [("2020-01-01", 100), ("2020-01-02", 0), ("2020-01-03", 1)])
    with pytest.raises(DataError, match=r"a\.csv:3"):
        load_prices(path)


@pytest.mark.parametrize("bad", ["abc", "-1", "nan"])
def test_invalid_price_rejected(write_prices, bad):
    path = write_prices("a.csv", [("2020-01-01", 100), ("2020-01-02", bad)])
    with pytest.raises(DataError, match=":3"):
        load_prices(path)


def test_duplicate_date(write_prices):
    path = write_prices("a.csv", [("2020-01-01", 100), ("2020-01-01", 101)])
    with pytest.raises(DataError, match="duplicate date"):
        load_prices(path)


def test_non_monotone_dates(write_prices):
    path = write_prices("a.csv", [("2020-01-02", 100), ("2020-01-01", 101)])
    with pytest.raises(DataError, match="not increasing"):
        load_prices(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_prices(tmp_path / "nope.csv")


def test_bad_header(write_prices):
    with pytest.raises(DataError, match="header"):
        load_prices(write_prices("a.csv", [("2020-01-01", 1), ("2020-01-02", 2)], "d,p"))


def test_bad_date(write_prices):
    with pytest.raises(DataError, match="ISO date"):
        load_prices(write_prices("a.csv", [("2020-01-01", 1), ("01/02/2020", 2)]))


def test_comment_block_skipped(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("# tool=x\n# seed=1\ndate,price\n2020-01-01,1\n2020-01-02,2\n")
    assert len(load_prices(path)) == 2


@pytest.mark.parametrize("prices, expected", [
    ([100, 100], [0.0]),
    ([100, 110], [np.log(1.1)]),
    ([100, 110, 100], [np.log(1.1), -np.log(1.1)]),
])
def test_log_returns(prices, expected):
    p = PriceSeries("a", [f"2020-01-0{i + 1}" for i in range(len(prices))], prices)
    r = compute_returns(p)
    assert_allclose(r.values, expected, rtol=1e-12)
    assert r.dates == p.dates[1:]
    assert_allclose(r.values[:1], [expected[0]], atol=1e-5)


def test_returns_known_value():
    p = PriceSeries("a", ["2020-01-01", "2020-01-02"], [100, 110])
    assert compute_returns(p).values[0] == pytest.approx(0.09531, abs=1e-5)


def test_price_series_needs_two():
    with pytest.raises(DataError):
        PriceSeries("a", ["2020-01-01"], [1.0])


@given(st.lists(st.floats(-0.2, 0.2, allow_nan=False), min_size=1, max_size=50))
@settings(max_examples=50, deadline=None)
def test_returns_roundtrip(rs):
    # exp-cumsum then log-difference recovers the returns
    prices = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(rs)]))
    dates = [f"{i:05d}" for i in range(len(prices))]
    back = compute_returns(PriceSeries("a", dates, prices)).values
    assert_allclose(back, rs, atol=1e-12)


def _series(aid, dates, values=None):
    values = np.arange(len(dates), dtype=float) if values is None else values
    return ReturnSeries(aid, dates, values)


def test_sync_identical():
    a = _series("a", ["d1", "d2", "d3"], np.array([1.0, 2, 3]))
    b = _series("b", ["d1", "d2", "d3"], np.array([4.0, 5, 6]))
    p = synchronize_pair(a, b)
    assert p.dates == ("d1", "d2", "d3")
    assert_allclose(p.values_1, a.values)
    assert_allclose(p.values_2, b.values)


def test_sync_disjoint():
    with pytest.raises(DataError, match="share no dates"):
        synchronize_pair(_series("a", ["d1"]), _series("b", ["d2"]))


def test_sync_intersection():
    a = _series("a", ["d1", "d2", "d3"], np.array([1.0, 2, 3]))
    b = _series("b", ["d2", "d3", "d4"], np.array([20.0, 30, 40]))
    p = synchronize_pair(a, b)
    assert p.dates == ("d2", "d3")
    assert_allclose(p.values_1, [2, 3])
    assert_allclose(p.values_2, [20, 30])


@given(st.sets(st.integers(0, 40), min_size=1), st.sets(st.integers(0, 40), min_size=1))
@settings(max_examples=60, deadline=None)
def test_sync_symmetric(da, db):
    if not da & db:
        return
    a = _series("a", [f"{d:03d}" for d in sorted(da)])
    b = _series("b", [f"{d:03d}" for d in sorted(db)], -np.arange(len(db), dtype=float))
    ab, ba = synchronize_pair(a, b), synchronize_pair(b, a)
    assert ab.dates == ba.dates
    assert_allclose(ab.values_1, ba.values_2)
    assert_allclose(ab.values_2, ba.values_1)
