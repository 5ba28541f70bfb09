import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nsfutures import signals as sg
from nsfutures.errors import ConfigError
from nsfutures.marketdata import CotSeries
from nsfutures.signals import SignalPanel


@pytest.fixture(scope="module")
def panels(small_pipeline):
    return small_pipeline.panels(4)


def test_delta_beta_is_day_over_day_change(small_pipeline):
    fits = small_pipeline.fits(4)
    sig = sg.delta_beta(fits, "S", small_pipeline.dates)
    wide = fits.wide("beta_slope", small_pipeline.dates)
    t = 200
    for cid in sig.commodities:
        expect = wide[cid].iloc[t] - wide[cid].iloc[t - 1]
        assert sig.values[cid].iloc[t] == pytest.approx(expect, abs=1e-14)
    assert sig.kind == "DBS"
    assert sig.values.iloc[0].isna().all()
    with pytest.raises(ConfigError):
        sg.delta_beta(fits, "X")


def test_smooth_needs_a_full_window():
    idx = pd.bdate_range("2020-01-01", periods=6)
    vals = pd.DataFrame({"a": [1.0, 2.0, np.nan, 4.0, 5.0, 6.0]}, index=idx)
    out = sg.smooth(SignalPanel("DBS", vals), 3)
    assert out.kind == "DBS_MA3"
    assert out.values["a"].isna().tolist() == [True, True, True, True, True, False]
    assert out.values["a"].iloc[-1] == pytest.approx(5.0)
    assert sg.smooth(SignalPanel("DBS", vals), 1).values.equals(SignalPanel("DBS", vals).values)


def test_slope_diff_and_roll_yield_by_hand(panels):
    p = panels["corn"]
    t = 123
    ds = sg.slope_diff(panels).values["corn"].iloc[t]
    assert ds == pytest.approx((p.price[t, 0] - p.price[t, 3]) - (p.price[t - 1, 0] - p.price[t - 1, 3]))
    ry = sg.roll_yield(panels, 3).values["corn"].iloc[t]
    assert ry == pytest.approx(p.price[t, 0] / p.price[t, 2] - 1.0)
    with pytest.raises(ConfigError):
        sg.roll_yield(panels, 1)


def test_roll_yield_skips_shallow_panels(small_pipeline):
    deep = small_pipeline.panels(6)
    mixed = {"corn": deep["corn"], "gold": small_pipeline.panels(4)["gold"]}
    if mixed["gold"].depth >= 6:
        pytest.skip("pipeline reused a deeper panel")
    ry = sg.roll_yield(mixed, 6)
    assert ry.commodities == ["corn"]


def test_pc2_direction_matches_svd_and_orientation():
    rng = np.random.default_rng(3)
    base = np.cumsum(rng.normal(size=(40, 4)), axis=0) + 100
    v = sg._pc2_direction(base, 5)
    t = 20
    win = base[t - 4:t + 1]
    dev = win - win.mean(axis=0)
    _, _, vt = np.linalg.svd(dev, full_matrices=False)
    ref = vt[1] * np.sign(vt[1][0] - vt[1][3])
    np.testing.assert_allclose(v[t], ref, atol=1e-10)
    ok = np.isfinite(v[:, 0])
    assert np.all(v[ok, 0] - v[ok, 3] > 0)


def test_pc2_gap_on_repeated_eigenvalues():
    flat = np.full((10, 4), 50.0)
    assert np.isnan(sg._pc2_direction(flat, 5)).all()


def test_monthly_returns_need_complete_months():
    idx = pd.bdate_range("2021-01-01", "2021-03-31")
    r = pd.DataFrame({"a": 0.01}, index=idx)
    r.iloc[25, 0] = np.nan  # a February day
    m = sg.monthly_returns(r)
    assert list(m.index.strftime("%Y-%m-%d")) == ["2021-01-29", "2021-02-26", "2021-03-31"]
    assert m["a"].iloc[0] == pytest.approx(1.01 ** (idx.month == 1).sum() - 1)
    assert np.isnan(m["a"].iloc[1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=30, max_size=80))
def test_skew_matches_population_estimator(values):
    r = np.asarray(values)
    out = sg._skew(r, 30)
    win = r[-30:]
    if win.std() < 1e-6:
        return
    assert out[-1] == pytest.approx(stats.skew(win, bias=True), rel=1e-7, abs=1e-9)


def test_liq_drops_zero_return_days():
    r = np.array([0.01, 0.0, -0.02, 0.04])
    dv = np.array([100.0, 500.0, 300.0, 200.0])
    out = sg._liq(dv, r, 4)
    expect = np.mean([100 / 0.01, 300 / 0.02, 200 / 0.04])
    assert out[-1] == pytest.approx(expect)
    assert np.isnan(out[:3]).all()


def test_hedging_pressure_is_a_52_week_as_of_mean():
    tues = pd.date_range("2019-01-01", periods=60, freq="7D")
    short = np.arange(60) + 100.0
    long_ = np.full(60, 50.0)
    cot = {"a": CotSeries("a", tues.values, short, long_)}
    days = pd.bdate_range("2019-12-20", "2020-02-28")
    hp = sg.hedging_pressure(cot, days)["a"]
    ratio = (short - long_) / (short + long_)
    # a Friday sees that week's Tuesday report
    d = pd.Timestamp("2020-01-10")
    k = int(np.searchsorted(tues, d, side="right")) - 1
    assert hp.loc[d] == pytest.approx(ratio[k - 51:k + 1].mean())
    assert np.isnan(hp.loc["2019-12-20"])


def test_characteristics_shapes(small_pipeline):
    pan = small_pipeline.panels(4)
    mom = sg.characteristic("MOM", pan)
    assert mom.dates.equals(sg.month_ends(small_pipeline.dates))
    bm = sg.characteristic("BMOM", pan)
    front = sg._compound12(sg.monthly_returns(sg.daily_returns(pan, 1)))
    second = sg._compound12(sg.monthly_returns(sg.daily_returns(pan, 2)))
    pd.testing.assert_frame_equal(bm.values, SignalPanel("BMOM", front - second).values)
    carry = sg.characteristic("CARRY", pan)
    pd.testing.assert_frame_equal(carry.values, sg.roll_yield(pan, 2).values)
    hp = sg.characteristic("HP", pan, cot=small_pipeline.cot)
    assert hp.values.notna().any().all()
    with pytest.raises(ConfigError):
        sg.characteristic("HP", pan)
    with pytest.raises(ConfigError):
        sg.characteristic("VALUE", pan)


def test_signal_panel_export(tmp_path):
    idx = pd.bdate_range("2020-01-01", periods=2)
    p = SignalPanel("DBS", pd.DataFrame({"b": [1.0, np.nan], "a": [2.0, 3.0]}, index=idx))
    assert p.commodities == ["a", "b"]
    p.to_csv(tmp_path / "s.csv")
    back = pd.read_csv(tmp_path / "s.csv")
    assert list(back.columns) == ["date", "commodity", "kind", "value"]
    assert len(back) == 3
    assert p.restrict(commodities=["a"]).commodities == ["a"]
