"""Backtest the level, slope and curvature strategies against naive benchmarks.

Signals are day-over-day changes in the fitted betas; the books are
cross-sectional long-short spreads rebalanced daily.

    python3 demos/02_spread_strategies.py
"""

import pandas as pd

from nsfutures.backtest import Pipeline
from nsfutures.marketdata import default_config, simulate_market
from nsfutures.perfstats import summary_table
from nsfutures.portfolio import StrategySpec

UNIVERSE = ["corn", "wheat", "soybeans", "crude_oil", "gasoline", "gold", "silver", "copper",
            "live_cattle", "live_hogs", "coffee", "orange_juice"]

market = simulate_market(default_config(3000, commodities=UNIVERSE), seed=1)
pipe = Pipeline(market.chains, market.cot)

specs = [StrategySpec(f) for f in ("L", "S", "C", "LAVG", "SAVG", "CAVG")]
specs.append(StrategySpec("S", mode="ts"))
results = {s.label: pipe.run(s) for s in specs}

rows = ["ann_mean_arithmetic", "t_mean", "ann_volatility", "sharpe", "max_drawdown", "cer"]
gross = summary_table({k: r.gross for k, r in results.items()})[rows]
print("gross performance")
print(gross.astype(float).round(4).to_string())

costs = pd.DataFrame({
    k: {"turnover": r.turnover.mean(), "tc1": 252 * r.net_of("tc1").mean(),
        "tc2": 252 * r.net_of("tc2").mean(), "tc3": 252 * r.net_of("tc3").mean()}
    for k, r in results.items()
}).T
print("\nmean daily turnover and annualised net means")
print(costs.round(4).to_string())

# the flags column marks roll days and days with a one-sided book
s = results["S"].to_frame()
print(f"\nS: {s['flags'].str.contains('roll').sum()} roll days,"
      f" {s['flags'].str.contains('degenerate').sum()} degenerate days of {len(s)}")
