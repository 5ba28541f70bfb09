import dataclasses

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsfutures.errors import ConfigError, DataError, DuplicateError, ParseError
from nsfutures.marketdata import (
    ContractChain,
    ContractSeries,
    CurveSnapshot,
    SimulationConfig,
    curve_panel,
    default_config,
    load_chain,
    load_commodity_spec,
    load_cot,
    load_market,
    open_interest_profile,
    roll_schedule,
    simulate_market,
    snapshot,
    write_market,
)
from nsfutures.marketdata.roll import cutoffs_from_calendar, schedule_arrays

HEADER = "date,contract_code,expiry_date,settle,volume,open_interest\n"
SPEC = {"aaa": {"sector": "Energy", "multiplier": 1000, "tick_size": 0.01}}


def write(tmp_path, body, name="aaa.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


# -- parsing -------------------------------------------------------------------


def test_load_chain_groups_contracts_by_expiry(fixtures_dir):
    chain = load_chain(fixtures_dir / "ledger" / "aaa.csv", fixtures_dir / "ledger" / "commodities.yaml")
    assert chain.codes == ["AAAH20", "AAAJ20", "AAAK20"]
    assert chain.multiplier == 1000.0 and chain.sector == "Energy"
    assert len(chain.calendar()) == 6


@pytest.mark.parametrize(
    "body, line, exc",
    [
        ("2020-01-02,X,2020-03-19,50,1,1\n2020-13-02,X,2020-03-19,50,1,1\n", 3, ParseError),
        ("2020-01-02,X,2020-03-19,abc,1,1\n", 2, ParseError),
        ("2020-01-02,X,2020-03-19,0,1,1\n", 2, ParseError),
        ("2020-01-02,X,2020-03-19,50,-1,1\n", 2, ParseError),
        ("2020-04-02,X,2020-03-19,50,1,1\n", 2, ParseError),
        ("2020-01-02,X,2020-03-19,50,1,1\n2020-01-02,X,2020-03-19,51,1,1\n", 3, DuplicateError),
        ("2020-01-03,X,2020-03-19,50,1,1\n2020-01-02,X,2020-03-19,51,1,1\n", 3, ParseError),
    ],
)
def test_malformed_rows_name_the_line(tmp_path, body, line, exc):
    with pytest.raises(exc) as info:
        load_chain(write(tmp_path, body), SPEC)
    assert info.value.line == line
    assert info.value.exit_code == 2


def test_wrong_header_is_line_one(tmp_path):
    p = tmp_path / "aaa.csv"
    p.write_text("date,code,expiry,settle,volume,oi\n")
    with pytest.raises(ParseError) as info:
        load_chain(p, SPEC)
    assert info.value.line == 1


def test_unknown_commodity_and_bad_spec(tmp_path):
    p = write(tmp_path, "2020-01-02,X,2020-03-19,50,1,1\n", name="zzz.csv")
    with pytest.raises(ConfigError):
        load_chain(p, SPEC)
    with pytest.raises(ConfigError):
        load_commodity_spec({"aaa": {"sector": "Energy"}})
    with pytest.raises(ConfigError):
        load_commodity_spec({"aaa": {"sector": "Bonds", "multiplier": 1, "tick_size": 1}})


def test_load_cot_rejects_duplicates(tmp_path):
    p = tmp_path / "cot.csv"
    p.write_text("date,commodity_id,commercial_short,commercial_long\n2020-01-07,aaa,10,5\n2020-01-07,aaa,11,5\n")
    with pytest.raises(DuplicateError):
        load_cot(p)


# -- roll rule -----------------------------------------------------------------


def test_cutoff_is_last_trading_day_of_previous_month():
    cal = np.array(pd.bdate_range("2020-02-20", "2020-04-30").values.astype("datetime64[D]"))
    cut = cutoffs_from_calendar(np.array(["2020-03-19", "2020-04-20"], dtype="datetime64[D]"), cal)
    assert str(cut[0]) == "2020-02-28"
    assert str(cut[1]) == "2020-03-31"


def test_cutoff_beyond_data_falls_back_to_business_day():
    cal = np.array(pd.bdate_range("2020-02-20", "2020-03-03").values.astype("datetime64[D]"))
    cut = cutoffs_from_calendar(np.array(["2020-04-20"], dtype="datetime64[D]"), cal)
    assert str(cut[0]) == "2020-03-31"


def test_front_switches_at_the_cutoff_close(fixtures_dir):
    d = fixtures_dir / "ledger"
    chain = load_chain(d / "aaa.csv", d / "commodities.yaml")
    sched = roll_schedule(chain, depth=2)
    assert sched.mapping("2020-02-27") == {1: "AAAH20", 2: "AAAJ20"}
    assert sched.mapping("2020-02-28") == {1: "AAAJ20", 2: "AAAK20"}
    assert list(sched.roll_days.strftime("%Y-%m-%d")) == ["2020-02-28"]


def test_returns_never_straddle_a_roll(fixtures_dir):
    d = fixtures_dir / "ledger"
    panel = curve_panel(load_chain(d / "aaa.csv", d / "commodities.yaml"), depth=1)
    r = panel.location_returns(1)
    # return dated 02-28 belongs to the March contract, dated 03-02 to April
    assert r.loc["2020-02-28"] == pytest.approx(50.20 / 49.80 - 1, abs=1e-15)
    assert r.loc["2020-03-02"] == pytest.approx(51.50 / 51.30 - 1, abs=1e-15)


def test_missing_location_is_minus_one():
    days = np.array(["2020-01-02", "2020-01-03"], dtype="datetime64[D]")
    cutoffs = np.array(["2020-02-28"], dtype="datetime64[D]")
    firsts = np.array(["2020-01-02"], dtype="datetime64[D]")
    out = schedule_arrays(days, cutoffs, firsts, 3)
    assert out.tolist() == [[0, -1, -1], [0, -1, -1]]


@settings(max_examples=60, deadline=None)
@given(
    gaps=st.lists(st.integers(20, 40), min_size=3, max_size=15),
    lead=st.integers(30, 400),
    depth=st.integers(1, 4),
)
def test_schedule_locations_are_live_and_ordered(gaps, lead, depth):
    start = np.datetime64("2010-01-01")
    expiries = start + np.cumsum(gaps).astype("timedelta64[D]") + np.timedelta64(lead, "D")
    firsts = np.full(len(expiries), start)
    days = np.arange(start, expiries[-1]).astype("datetime64[D]")
    cutoffs = cutoffs_from_calendar(expiries, days)
    out = schedule_arrays(days, cutoffs, firsts, depth)
    for t in range(0, len(days), 7):
        row = out[t][out[t] >= 0]
        assert np.all(np.diff(row) > 0)
        assert np.all(days[t] < cutoffs[row])
        # no skipped live contract before the front
        if len(row):
            earlier = np.arange(row[0])
            assert not np.any(days[t] < cutoffs[earlier])


def test_snapshot_and_oi_profile(small_market):
    chain = small_market.chains["corn"]
    snap = snapshot(chain, chain.calendar()[300], depth=4)
    assert isinstance(snap, CurveSnapshot) and len(snap) == 4
    assert np.all(np.diff(snap.maturities) > 0)
    prof = open_interest_profile(chain, 12)
    cum = prof["cumulative_share"].to_numpy()
    assert np.all(np.diff(cum) >= -1e-15) and cum[-1] == 1.0
    assert prof["share"].iloc[0] > prof["share"].iloc[3]


def test_chain_validation():
    with pytest.raises(DataError):
        ContractSeries("a", "X", "2020-01-10", ["2020-01-02"], [0.0], [1], [1])
    c = ContractSeries("a", "X", "2020-01-10", ["2020-01-02"], [1.0], [1], [1])
    with pytest.raises(DataError):
        ContractChain("a", "Energy", (c, dataclasses.replace(c)), 1.0, 1.0)


# -- simulator -----------------------------------------------------------------


def test_simulation_is_seed_deterministic():
    cfg = default_config(120, commodities=["corn", "gold"])
    a, b, c = simulate_market(cfg, 4), simulate_market(cfg, 4), simulate_market(cfg, 5)
    pa = curve_panel(a.chains["gold"]).price
    assert np.array_equal(pa, curve_panel(b.chains["gold"]).price, equal_nan=True)
    assert not np.allclose(pa, curve_panel(c.chains["gold"]).price, equal_nan=True)
    pd.testing.assert_frame_equal(a.truth, b.truth)


def test_commodity_streams_do_not_depend_on_universe():
    one = simulate_market(default_config(100, commodities=["corn", "gold"]), 9)
    two = simulate_market(default_config(100, commodities=["corn", "gold", "wheat"]), 9)
    # child streams are spawned per position, so the first commodity is shared
    first = sorted(one.chains)[0]
    assert np.array_equal(curve_panel(one.chains[first]).price, curve_panel(two.chains[first]).price, equal_nan=True)


def test_cot_is_weekly_on_tuesdays(small_market):
    cot = small_market.cot["corn"]
    assert set(pd.DatetimeIndex(cot.dates).dayofweek) == {1}


def test_simulation_config_validation():
    with pytest.raises(ConfigError):
        SimulationConfig.from_dict({"overrides": {"persistence": {"slope": 1.2}}})
    with pytest.raises(ConfigError):
        SimulationConfig.from_dict({"subset": ["unobtainium"]})
    with pytest.raises(ConfigError):
        SimulationConfig.from_dict({"n_days": 1})
    with pytest.raises(ConfigError):
        SimulationConfig.from_dict({"bogus": 3})
    cfg = SimulationConfig.from_dict({"n_days": 50, "subset": ["gold"], "overrides": {"noise_scale": 0.0}})
    assert cfg.commodities[0].noise == 0.0 and cfg.n_days == 50


def test_written_market_round_trips(tmp_path):
    market = simulate_market(default_config(90, commodities=["corn", "gold"]), 2)
    write_market(market, tmp_path)
    chains, cot = load_market(tmp_path / "prices", tmp_path / "commodities.yaml", tmp_path / "cot.csv")
    for cid, chain in market.chains.items():
        a, b = curve_panel(chain), curve_panel(chains[cid])
        assert chain.codes == chains[cid].codes
        # price files carry 10 significant digits
        np.testing.assert_allclose(a.price, b.price, rtol=5e-10, equal_nan=True)
    assert sorted(cot) == ["corn", "gold"]
    truth = pd.read_csv(tmp_path / "truth.csv")
    assert len(truth) == 2 * 90
