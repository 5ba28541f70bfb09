import numpy as np
import pandas as pd
import pytest

from nsfutures.backtest import (
    BacktestResult,
    CostModel,
    Pipeline,
    evaluate,
    run,
    select_universe,
    subsample_masks,
    unit_cost,
)
from nsfutures.errors import ConfigError, DataError
from nsfutures.marketdata import SimulationConfig, simulate_market
from nsfutures.marketdata.roll import CurvePanel
from nsfutures.perfstats import mean_tstat
from nsfutures.portfolio import StrategySpec, WeightBook

from conftest import SMALL_UNIVERSE, bdays

TC2 = (CostModel("TC2"),)


def make_panel(cid, quotes, contract, mult=100.0, tick=0.25):
    """Location panel from ``quotes[t][code]`` and a (T, K) table of held codes."""
    T = len(quotes)
    contract = np.asarray(contract, dtype=object)
    codes = tuple(sorted({c for row in contract for c in row if c is not None}))
    K = contract.shape[1]
    cidx = np.full((T, K), -1)
    price = np.full((T, K), np.nan)
    nxt = np.full((T, K), np.nan)
    for t in range(T):
        for k in range(K):
            code = contract[t, k]
            if code is None:
                continue
            cidx[t, k] = codes.index(code)
            price[t, k] = quotes[t].get(code, np.nan)
            if t + 1 < T:
                nxt[t, k] = quotes[t + 1].get(code, np.nan)
    dates = bdays(T)
    ones = np.ones((T, K))
    return CurvePanel(cid, "Grains", mult, tick, dates, cidx, codes, price, nxt,
                      ones * 30.0, ones, ones, ones)


def make_book(dates, comms, weights, spec=StrategySpec("L"), rebalance=None):
    w = np.asarray(weights, dtype=float)
    if w.ndim == 2:
        w = w[:, :, None]
    reb = np.ones(len(dates), bool) if rebalance is None else np.asarray(rebalance, bool)
    legs = np.sign(w.sum(axis=2)).astype(np.int8)
    return WeightBook(dates, tuple(comms), w, legs, np.zeros(len(dates), bool), reb, spec)


# -- costs ------------------------------------------------------------------------


def test_unit_cost_scenarios():
    price = np.array([50.0])
    assert unit_cost(CostModel("TC1"), 1000, 0.01, price)[0] == pytest.approx(1.5 / 50_000)
    assert unit_cost(CostModel("TC2"), 1000, 0.01, price)[0] == pytest.approx(0.000167)
    assert unit_cost(CostModel("TC3"), 1000, 0.01, price)[0] == pytest.approx((1.5 + 0.25 * 0.01 * 1000) / 50_000)
    assert unit_cost(CostModel("ZERO"), 1000, 0.01, price)[0] == 0.0
    with pytest.raises(ConfigError):
        CostModel("TC9")
    with pytest.raises(ConfigError):
        CostModel("TC1", commission=-1)
    with pytest.raises(DataError):
        unit_cost(CostModel("TC1"), 1, 1, np.array([0.0]))


# -- hand ledgers ---------------------------------------------------------------------


def test_outright_daily_rebalance_by_hand():
    quotes = [{"A": 100.0}, {"A": 110.0}, {"A": 99.0}]
    panel = make_panel("a", quotes, [["A"]] * 3)
    book = make_book(panel.dates, ["a"], [[1.0], [1.0], [1.0]])
    res = evaluate(book, {"a": panel}, TC2 + (CostModel("ZERO"),))
    assert res.gross.tolist() == pytest.approx([0.10, -0.10])
    # drifted 1.1 back to 1.0, then 0.9 back to 1.0
    assert res.turnover.tolist() == pytest.approx([0.10, 0.10])
    assert res.net_of("TC2").tolist() == pytest.approx([0.10 - 0.5 * 0.1 * 0.000167, -0.10 - 0.5 * 0.1 * 0.000167])
    pd.testing.assert_series_equal(res.net_of("zero"), res.gross, check_names=False)


def test_series_starts_the_day_after_the_first_position():
    quotes = [{"A": 100.0}, {"A": 100.0}, {"A": 102.0}, {"A": 102.0}]
    panel = make_panel("a", quotes, [["A"]] * 4)
    book = make_book(panel.dates, ["a"], [[0.0], [1.0], [1.0], [0.0]])
    res = evaluate(book, {"a": panel}, TC2)
    # the opening trade precedes the first reported return; the exit is charged
    assert list(res.dates) == list(panel.dates[2:])
    assert res.gross.tolist() == pytest.approx([0.02, 0.0])
    assert res.turnover.tolist() == pytest.approx([0.02, 1.0])


def test_roll_counts_exit_and_entry():
    quotes = [{"H": 10.0, "J": 20.0}, {"H": 11.0, "J": 21.0}, {"H": 11.0, "J": 22.0}]
    panel = make_panel("a", quotes, [["H"], ["J"], ["J"]])
    book = make_book(panel.dates, ["a"], [[1.0], [1.0], [1.0]])
    res = evaluate(book, {"a": panel}, TC2)
    # day 1: H earned 10%; the drifted 1.1 in H is sold and 1.0 of J bought
    assert res.gross.iloc[0] == pytest.approx(0.10)
    assert res.turnover.iloc[0] == pytest.approx(2.1)
    assert res.flags["roll"].tolist() == [True, False]
    assert res.gross.iloc[1] == pytest.approx(22 / 21 - 1)


def test_spread_costs_one_ticket_unless_two_ticket():
    quotes = [{"A": 100.0, "B": 50.0}, {"A": 101.0, "B": 49.0}, {"A": 100.0, "B": 50.0}]
    panel = make_panel("a", quotes, [["A", "B"]] * 3)
    w = np.array([[[0.5, -0.5]]] * 3)
    book = make_book(panel.dates, ["a"], w, spec=StrategySpec("S", geometry="slope", far=2))
    one = evaluate(book, {"a": panel}, TC2)
    two = evaluate(book, {"a": panel}, TC2, two_ticket=True)
    drag_one = one.gross - one.net_of("tc2")
    drag_two = two.gross - two.net_of("tc2")
    np.testing.assert_allclose(drag_two, 2 * drag_one, rtol=1e-12)
    np.testing.assert_allclose(drag_two, 0.5 * two.turnover * 0.000167, rtol=1e-12)


def test_missing_next_price_books_zero_and_flags():
    quotes = [{"A": 100.0}, {"A": 105.0}, {}, {"A": 100.0}]
    panel = make_panel("a", quotes, [["A"]] * 4)
    book = make_book(panel.dates, ["a"], [[1.0], [1.0], [0.0], [0.0]])
    res = evaluate(book, {"a": panel}, TC2)
    assert res.gross.iloc[1] == 0.0
    assert res.flags["missing"].tolist()[:2] == [False, True]


def test_weight_on_unpriced_contract_is_a_data_error():
    quotes = [{"A": 100.0}, {}, {"A": 100.0}]
    panel = make_panel("a", quotes, [["A"]] * 3)
    book = make_book(panel.dates, ["a"], [[1.0], [1.0], [1.0]])
    with pytest.raises(DataError):
        evaluate(book, {"a": panel}, TC2)


def test_monthly_book_drifts_between_rebalances():
    quotes = [{"A": 100.0, "B": 100.0}, {"A": 110.0, "B": 90.0}, {"A": 121.0, "B": 90.0}]
    pa = make_panel("a", [{"A": q["A"]} for q in quotes], [["A"]] * 3)
    pb = make_panel("b", [{"B": q["B"]} for q in quotes], [["B"]] * 3)
    w = [[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]
    book = make_book(pa.dates, ["a", "b"], w, spec=StrategySpec("AVG"), rebalance=[True, False, False])
    res = evaluate(book, {"a": pa, "b": pb}, TC2)
    assert res.holdings[1, :, 0].tolist() == pytest.approx([0.55, 0.45])
    assert res.gross.iloc[1] == pytest.approx(0.55 * 0.10)
    assert res.turnover.tolist() == pytest.approx([0.0, 0.0])


def test_book_on_a_different_grid_is_rejected():
    quotes = [{"A": 100.0}] * 3
    panel = make_panel("a", quotes, [["A"]] * 3)
    book = make_book(bdays(3, "2021-01-01"), ["a"], [[1.0]] * 3)
    with pytest.raises(ConfigError):
        evaluate(book, {"a": panel})
    with pytest.raises(ConfigError):
        evaluate(make_book(panel.dates, ["z"], [[1.0]] * 3), {"a": panel})


# -- results and universes -----------------------------------------------------------


def test_result_csv_round_trip(tmp_path, small_pipeline):
    res = small_pipeline.run(StrategySpec("S"))
    res.to_csv(tmp_path / "S.csv")
    back = BacktestResult.from_csv(tmp_path / "S.csv")
    assert back.label == "S"
    np.testing.assert_allclose(back.gross, res.gross, rtol=1e-14)
    np.testing.assert_allclose(back.net_of("tc3"), res.net_of("tc3"), rtol=1e-14)
    assert back.flags["roll"].equals(res.flags["roll"].reset_index(drop=True).set_axis(back.flags.index))
    cols = pd.read_csv(tmp_path / "S.csv").columns.tolist()
    assert cols == ["date", "gross", "turnover", "net_tc1", "net_tc2", "net_tc3", "flags"]


def test_run_respects_date_range(small_market):
    start, end = "1991-06-03", "1991-12-31"
    dates = Pipeline(small_market.chains).dates
    if not (dates[0] < pd.Timestamp(start) and dates[-1] > pd.Timestamp(end)):
        pytest.skip("simulated calendar does not cover the window")
    res = run(StrategySpec("L"), small_market.chains, start=start, end=end, sectors=["Grains", "Metals"])
    assert res.dates[0] > pd.Timestamp(start) and res.dates[-1] <= pd.Timestamp(end)
    book = res.book
    assert set(book.commodities) <= {"corn", "wheat", "soybeans", "gold", "silver"}


def test_subsample_masks_partition():
    dates = pd.DatetimeIndex(["2000-12-29", "2001-01-02", "2009-03-31", "2009-04-01"])
    masks = subsample_masks(dates)
    assert list(masks) == ["start..2000-12-31", "2000-12-31..2009-03-31", "2009-03-31..end"]
    stack = np.vstack(list(masks.values()))
    assert (stack.sum(axis=0) == 1).all()
    assert masks["2000-12-31..2009-03-31"].tolist() == [False, True, True, False]


def test_select_universe(small_market):
    assert list(select_universe(small_market.chains, sectors="Metals")) == ["gold", "silver"]
    with pytest.raises(ConfigError):
        select_universe(small_market.chains, sectors=["Softs"], commodities=["gold"])
    with pytest.raises(ConfigError):
        select_universe(small_market.chains, commodities=["platinum"])


def test_persistence_free_market_has_no_slope_premium():
    """Negative control: with no momentum in the curve factors the signal earns nothing."""
    cfg = SimulationConfig.from_dict({
        "n_days": 4000, "subset": SMALL_UNIVERSE,
        "overrides": {"persistence": [0.0, 0.0, 0.0]},
    })
    tstats = []
    for seed in range(3):
        gross = Pipeline(simulate_market(cfg, seed).chains).run(StrategySpec("S"), costs=()).gross
        tstats.append(mean_tstat(gross))
    assert max(abs(t) for t in tstats) < 2.5, tstats
