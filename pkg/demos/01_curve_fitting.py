"""Fit Nelson-Siegel curves to a simulated futures market.

Walks through one curve snapshot, the restricted-model R2 comparison and the
open-interest profile that motivates trading the first four locations.

    python3 demos/01_curve_fitting.py
"""

import numpy as np

from nsfutures.marketdata import default_config, open_interest_table, simulate_market, snapshot
from nsfutures.nscurve import LEVEL_CURVATURE, LEVEL_SLOPE, decay_factor, fit_ns, restricted_r2_table

UNIVERSE = ["corn", "wheat", "soybeans", "crude_oil", "gasoline", "gold", "copper", "live_cattle"]

market = simulate_market(default_config(1500, commodities=UNIVERSE), seed=7)
chain = market.chains["crude_oil"]
day = chain.calendar()[750]

snap = snapshot(chain, day, depth=4)
print(f"crude oil on {snap.date.date()}")
print("  maturities (months):", np.round(snap.maturities, 2))
print("  settles:            ", np.round(snap.prices, 3))

fit = fit_ns(snap)
print(f"  decay lambda = {fit.lambda_:.4f} (mean maturity {snap.maturities.mean():.2f} months,"
      f" check {decay_factor(snap.maturities.mean()):.4f})")
print(f"  level {fit.beta_level:.3f}  slope {fit.beta_slope:.3f}  curvature {fit.beta_curvature:.3f}"
      f"  R2 {fit.r_squared:.5f}")
for comp in (LEVEL_SLOPE, LEVEL_CURVATURE):
    print(f"  {comp.label:6s} R2 {fit_ns(snap, comp).r_squared:.5f}")

# dropping curvature costs little, dropping slope costs a lot
print("\nmean R2 by model over every commodity-day")
print(restricted_r2_table(market.chains).round(4).to_string())

# most open interest sits in the first few contracts
oi = open_interest_table(market.chains, max_depth=8)
print("\ncumulative open-interest share by location (average row)")
print(oi.loc["average"].round(3).to_string())
