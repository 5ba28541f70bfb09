"""Dispersion timing, a monthly blend and spanning regressions for the slope strategy.

    python3 demos/03_timing_and_spanning.py
"""

import pandas as pd

from nsfutures.backtest import Pipeline
from nsfutures.marketdata import default_config, simulate_market
from nsfutures.perfstats import sharpe_difference_test, spanning, summarize
from nsfutures.portfolio import StrategySpec, blend, dispersion_series, timing_overlay

UNIVERSE = ["corn", "wheat", "soybeans", "crude_oil", "heating_oil", "gold", "silver", "coffee", "cocoa", "live_cattle"]

market = simulate_market(default_config(3000, commodities=UNIVERSE), seed=3)
pipe = Pipeline(market.chains, market.cot)
res = {lab: pipe.run(StrategySpec(lab)) for lab in ("S", "C", "LAVG", "SAVG", "CAVG")}
s = res["S"].gross

# lever up when the cross-section of slope betas is dispersed
disp = dispersion_series(pipe.fits(4))
print("timed slope strategy (volatility matched to the base)")
for d in (5, 22):
    tim = timing_overlay(s, disp, d)
    base = s.loc[tim.returns.index]
    test = sharpe_difference_test(tim.returns, base)
    print(f"  d={d:2d}: SR {summarize(tim.returns).sharpe:.3f} vs base {summarize(base).sharpe:.3f},"
          f" diff z {test.statistic:.2f} (p {test.p_value:.3f})")

mix = blend(res["S"].gross, res["C"].gross)
print(f"\nS/C blend reset monthly: SR {summarize(mix).sharpe:.3f}")

factors = pd.DataFrame({k: res[k].gross for k in ("LAVG", "SAVG", "CAVG")})
rep = spanning(s, factors, frequency="monthly")
print("\nS on the naive benchmarks, monthly, Newey-West errors")
print(rep.table().round(4).to_string())
print(f"annualised alpha {rep.alpha_annualized:.4f}, adj R2 {rep.adj_r_squared:.3f}")
