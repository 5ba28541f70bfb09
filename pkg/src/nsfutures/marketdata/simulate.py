"""Synthetic futures markets driven by known level/slope/curvature paths.

Each commodity's betas follow

    d_beta[t] = phi * d_beta[t-1] - kappa * (beta[t-1] - beta0) + sigma * eps[t]

so ``phi`` is the AR(1) persistence of the daily beta changes and ``kappa`` a
weak anchor that keeps the simulated curves positive over long samples. Prices
are the NS curve (optionally with the seasonal term) evaluated at each listed
contract's maturity, plus i.i.d. Gaussian noise.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
import yaml
from scipy.signal import lfilter

from ..errors import ConfigError
from ..nscurve import NINE, OMEGA, decay_factor, ns_loadings
from .roll import cutoffs_from_calendar, schedule_arrays
from .types import DAYS_PER_MONTH, SECTORS, ContractChain, ContractSeries, CotSeries

_MONTH_CODES = "FGHJKMNQUVXZ"

# (id, sector, typical price, multiplier, tick)
_UNIVERSE = [
    ("crude_oil", "Energy", 50.0, 1000.0, 0.01),
    ("gasoline", "Energy", 1.45, 42000.0, 0.0001),
    ("heating_oil", "Energy", 1.50, 42000.0, 0.0001),
    ("corn", "Grains", 3.60, 5000.0, 0.0025),
    ("oats", "Grains", 2.20, 5000.0, 0.0025),
    ("rough_rice", "Grains", 11.0, 2000.0, 0.005),
    ("wheat", "Grains", 4.90, 5000.0, 0.0025),
    ("cotton", "Industrials", 0.68, 50000.0, 0.0001),
    ("lumber", "Industrials", 300.0, 110.0, 0.1),
    ("feeder_cattle", "Meats", 1.10, 50000.0, 0.00025),
    ("live_cattle", "Meats", 0.85, 40000.0, 0.00025),
    ("live_hogs", "Meats", 0.65, 40000.0, 0.00025),
    ("copper", "Metals", 2.00, 25000.0, 0.0005),
    ("gold", "Metals", 700.0, 100.0, 0.1),
    ("silver", "Metals", 12.0, 5000.0, 0.005),
    ("soybean_meal", "Oilseeds", 230.0, 100.0, 0.1),
    ("soybean_oil", "Oilseeds", 0.30, 60000.0, 0.0001),
    ("soybeans", "Oilseeds", 8.50, 5000.0, 0.0025),
    ("cocoa", "Softs", 1800.0, 10.0, 1.0),
    ("coffee", "Softs", 1.20, 37500.0, 0.0005),
    ("orange_juice", "Softs", 1.10, 15000.0, 0.0005),
]


@dataclass(frozen=True)
class CommoditySim:
    """Parameters of one simulated commodity; betas are in price units."""

    commodity_id: str
    sector: str
    multiplier: float
    tick_size: float
    beta0: tuple = (100.0, -2.0, 1.0)
    persistence: tuple = (0.0, 0.3, 0.3)
    volatility: tuple = (1.0, 0.3, 0.4)
    noise: float = 0.0
    seasonal_amplitude: float = 0.0
    seasonal_theta: int = 1
    volume: float = 20000.0
    open_interest: float = 100000.0
    oi_decay: float = 0.35
    hedging_mean: float = 0.1
    cot_total: float = 50000.0

    def validate(self):
        cid = self.commodity_id
        if self.sector not in SECTORS:
            raise ConfigError(f"{cid}: unknown sector {self.sector!r}")
        if not (self.multiplier > 0 and self.tick_size > 0):
            raise ConfigError(f"{cid}: multiplier and tick_size must be positive")
        for name in ("beta0", "persistence", "volatility"):
            if len(getattr(self, name)) != 3:
                raise ConfigError(f"{cid}: {name} needs three entries (level, slope, curvature)")
        for phi in self.persistence:
            if not -1.0 < phi < 1.0:
                raise ConfigError(f"{cid}: persistence {phi} outside (-1, 1)")
        if min(self.volatility) < 0 or self.noise < 0:
            raise ConfigError(f"{cid}: volatilities and noise must be non-negative")
        if not 1 <= int(self.seasonal_theta) <= 12:
            raise ConfigError(f"{cid}: seasonal_theta must be in 1..12")
        if not -1.0 < self.hedging_mean < 1.0:
            raise ConfigError(f"{cid}: hedging_mean must be in (-1, 1)")


@dataclass(frozen=True)
class SimulationConfig:
    commodities: tuple
    start: str = "1990-01-02"
    n_days: int = 2520
    listed: int = 13
    expiry_day: int = 20
    lambda_depth: int = 4
    mean_reversion: float = 0.002
    cot: bool = True

    def validate(self):
        if not self.commodities:
            raise ConfigError("simulation needs at least one commodity")
        ids = [c.commodity_id for c in self.commodities]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate commodity ids in simulation config")
        for c in self.commodities:
            c.validate()
        if self.n_days < 2:
            raise ConfigError("n_days must be at least 2")
        if not 1 <= self.expiry_day <= 28:
            raise ConfigError("expiry_day must be in 1..28")
        if self.listed < self.lambda_depth + 1:
            raise ConfigError("listed contracts must exceed lambda_depth")
        if not 0.0 <= self.mean_reversion < 1.0:
            raise ConfigError("mean_reversion must be in [0, 1)")

    def spec(self) -> dict:
        """Commodity spec table (sector, multiplier, tick) of the simulated universe."""
        return {
            c.commodity_id: {"sector": c.sector, "multiplier": c.multiplier, "tick_size": c.tick_size}
            for c in self.commodities
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SimulationConfig":
        raw = dict(raw or {})
        universe = raw.pop("universe", "default")
        overrides = raw.pop("overrides", {}) or {}
        subset = raw.pop("subset", None)
        if universe == "default" or universe is None:
            comms = default_universe()
        else:
            try:
                comms = [CommoditySim(**_tuplify(dict(c))) for c in universe]
            except TypeError as exc:
                raise ConfigError(f"bad commodity entry in simulation config: {exc}") from None
        if subset:
            known = {c.commodity_id for c in comms}
            missing = sorted(set(subset) - known)
            if missing:
                raise ConfigError(f"unknown commodities in subset: {', '.join(missing)}")
            comms = [c for c in comms if c.commodity_id in set(subset)]
        comms = [_apply_overrides(c, overrides) for c in comms]
        names = {f.name for f in dataclasses.fields(cls)} - {"commodities"}
        extra = sorted(set(raw) - names)
        if extra:
            raise ConfigError(f"unknown simulation keys: {', '.join(extra)}")
        cfg = cls(commodities=tuple(comms), **raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path) -> "SimulationConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})


def _tuplify(entry: dict) -> dict:
    for key in ("beta0", "persistence", "volatility"):
        if key in entry:
            entry[key] = tuple(float(v) for v in entry[key])
    return entry


def _apply_overrides(c: CommoditySim, overrides: Mapping) -> CommoditySim:
    """Overrides apply to every commodity. Triples accept a dict keyed by
    level/slope/curvature; ``*_scale`` keys multiply the commodity's price scale."""
    if not overrides:
        return c
    changes = {}
    scale = abs(c.beta0[0])
    for key, value in overrides.items():
        if key in ("persistence", "volatility", "beta0"):
            current = list(changes.get(key, getattr(c, key)))
            if isinstance(value, Mapping):
                for comp, v in value.items():
                    if comp not in ("level", "slope", "curvature"):
                        raise ConfigError(f"override {key}: unknown component {comp!r}")
                    current[("level", "slope", "curvature").index(comp)] = float(v)
            else:
                current = [float(v) for v in value]
            changes[key] = tuple(current)
        elif key == "volatility_scale":
            changes["volatility"] = tuple(float(v) * scale for v in value)
        elif key == "noise_scale":
            changes["noise"] = float(value) * scale
        elif key == "seasonal_scale":
            changes["seasonal_amplitude"] = float(value) * scale
        elif key in {f.name for f in dataclasses.fields(CommoditySim)} - {"commodity_id", "sector"}:
            changes[key] = value
        else:
            raise ConfigError(f"unknown simulation override {key!r}")
    return dataclasses.replace(c, **changes)


def default_universe(noise_scale: float = 3e-5, seasonal: bool = True) -> list[CommoditySim]:
    """The 21-commodity universe with realistic contract specs.

    Betas and volatilities scale with each commodity's typical price; the nine
    seasonal commodities get a small seasonal component.
    """
    out = []
    for i, (cid, sector, level, mult, tick) in enumerate(_UNIVERSE):
        slope0 = level * (-0.02 + 0.004 * (i % 5))
        curv0 = level * (0.01 - 0.002 * (i % 3))
        seasonal_on = seasonal and cid in NINE
        out.append(
            CommoditySim(
                commodity_id=cid,
                sector=sector,
                multiplier=mult,
                tick_size=tick,
                beta0=(level, slope0, curv0),
                volatility=(0.01 * level, 0.003 * level, 0.003 * level),
                noise=noise_scale * level,
                seasonal_amplitude=0.005 * level if seasonal_on else 0.0,
                seasonal_theta=1 + (3 * i) % 12,
                volume=20000.0 + 1500.0 * i,
                open_interest=1e5 + 1e4 * i,
                hedging_mean=0.05 + 0.01 * (i % 7),
            )
        )
    return out


def default_config(n_days: int = 2520, commodities: Sequence[str] | None = None, **kwargs) -> SimulationConfig:
    comms = default_universe()
    if commodities is not None:
        comms = [c for c in comms if c.commodity_id in set(commodities)]
    cfg = SimulationConfig(commodities=tuple(comms), n_days=n_days, **kwargs)
    cfg.validate()
    return cfg


@dataclass(frozen=True, eq=False)
class SimulatedMarket:
    chains: dict
    cot: dict
    truth: pd.DataFrame
    config: SimulationConfig = field(repr=False)

    def spec(self) -> dict:
        return self.config.spec()


def _contract_calendar(cfg: SimulationConfig, cal: np.ndarray):
    """Expiries, listing dates and codes of every contract touching ``cal``."""
    first_month = cal[0].astype("datetime64[M]")
    last_month = cal[-1].astype("datetime64[M]") + cfg.listed + 1
    months = np.arange(first_month, last_month + 1)
    nominal = months.astype("datetime64[D]") + (cfg.expiry_day - 1)
    # the business day on or before the nominal expiry day
    expiries = np.busday_offset(nominal, 0, roll="backward")
    listed_from = (months - cfg.listed).astype("datetime64[D]")
    firsts = np.maximum(np.busday_offset(listed_from, 0, roll="forward"), cal[0])
    years = months.astype("datetime64[Y]").astype(int) + 1970
    codes = [f"{_MONTH_CODES[m.astype(int) % 12]}{y}" for m, y in zip(months, years)]
    return expiries, firsts, codes


def _beta_paths(c: CommoditySim, kappa: float, T: int, rng: np.random.Generator) -> np.ndarray:
    """(T, 3) beta paths; beta[0] = beta0 and d_beta[0] = 0."""
    eps = rng.standard_normal((T, 3))
    eps[0] = 0.0
    out = np.empty((T, 3))
    for j in range(3):
        phi, sigma = c.persistence[j], c.volatility[j]
        # x_t = (1 + phi - kappa) x_{t-1} - phi x_{t-2} + sigma eps_t, x = beta - beta0
        x = lfilter([1.0], [1.0, -(1.0 + phi - kappa), phi], sigma * eps[:, j])
        out[:, j] = c.beta0[j] + x
    return out


def simulate_market(config: SimulationConfig, seed: int = 0) -> SimulatedMarket:
    """Generate chains, CoT positions and the ground-truth beta paths."""
    config.validate()
    cal = np.busday_offset(np.datetime64(pd.Timestamp(config.start).date(), "D"), np.arange(config.n_days), roll="forward")
    T = len(cal)
    expiries, firsts, codes = _contract_calendar(config, cal)
    cutoffs = cutoffs_from_calendar(expiries, cal)
    sched = schedule_arrays(cal, cutoffs, firsts, config.lambda_depth)
    if np.any(sched < 0):
        raise ConfigError("simulated calendar leaves curve locations empty; raise 'listed'")
    mdays = (expiries[sched] - cal[:, None]).astype(np.int64).astype(float)
    lam = decay_factor(mdays.mean(axis=1) / DAYS_PER_MONTH)

    # long table of (contract, day) rows: each contract trades from listing to expiry
    first_idx = np.searchsorted(cal, firsts, side="left")
    last_idx = np.searchsorted(cal, expiries, side="right") - 1
    n_rows = np.maximum(last_idx - first_idx + 1, 0)
    row_c = np.repeat(np.arange(len(expiries)), n_rows)
    row_t = np.concatenate([np.arange(a, a + n) for a, n in zip(first_idx, n_rows)])
    row_m = (expiries[row_c] - cal[row_t]).astype(np.int64) / DAYS_PER_MONTH
    # rank of each row among the contracts trading that day (0 = nearest expiry)
    order = np.lexsort((row_c, row_t))
    rank = np.empty(len(row_t), dtype=np.int64)
    sorted_t = row_t[order]
    starts = np.searchsorted(sorted_t, sorted_t, side="left")
    rank[order] = np.arange(len(order)) - starts

    seeds = np.random.SeedSequence(seed).spawn(len(config.commodities))
    chains, cot, truth = {}, {}, []
    for c, ss in zip(config.commodities, seeds):
        rng = np.random.default_rng(ss)
        betas = _beta_paths(c, config.mean_reversion, T, rng)
        load = _row_loadings(lam[row_t], row_m)
        price = np.einsum("ij,ij->i", load, betas[row_t])
        if c.seasonal_amplitude:
            price += c.seasonal_amplitude * np.cos(OMEGA * row_m - OMEGA * c.seasonal_theta)
        price += c.noise * rng.standard_normal(len(price))
        if not np.all(price > 0):
            bad = int(np.flatnonzero(~(price > 0))[0])
            raise ConfigError(
                f"{c.commodity_id}: simulated price non-positive on {cal[row_t[bad]]}; "
                "lower volatility or raise mean_reversion"
            )
        shock = rng.lognormal(0.0, 0.2, size=(2, len(price)))
        oi = np.rint(c.open_interest * np.exp(-c.oi_decay * rank) * shock[0])
        vol = np.rint(c.volume * np.exp(-1.5 * c.oi_decay * rank) * shock[1])
        contracts = []
        bounds = np.concatenate([[0], np.cumsum(n_rows)])
        for j in range(len(expiries)):
            a, b = bounds[j], bounds[j + 1]
            if a == b:
                continue
            contracts.append(
                ContractSeries(c.commodity_id, codes[j], expiries[j], cal[row_t[a:b]], price[a:b], vol[a:b], oi[a:b])
            )
        chains[c.commodity_id] = ContractChain(c.commodity_id, c.sector, tuple(contracts), c.multiplier, c.tick_size)
        if config.cot:
            cot[c.commodity_id] = _simulate_cot(c, cal, rng)
        truth.append(
            pd.DataFrame(
                {
                    "date": pd.DatetimeIndex(cal).as_unit("ns"),
                    "commodity": c.commodity_id,
                    "beta_level": betas[:, 0],
                    "beta_slope": betas[:, 1],
                    "beta_curvature": betas[:, 2],
                    "beta_seasonal": c.seasonal_amplitude,
                    "theta": c.seasonal_theta,
                    "lambda": lam,
                }
            )
        )
    return SimulatedMarket(chains, cot, pd.concat(truth, ignore_index=True), config)


def _row_loadings(lam: np.ndarray, m: np.ndarray) -> np.ndarray:
    """(n, 3) NS loadings for per-row decay ``lam`` and maturity ``m`` (months)."""
    out = np.empty((len(m), 3))
    for i in range(0, len(m), 200_000):
        sl = slice(i, i + 200_000)
        out[sl] = ns_loadings(lam[sl], m[sl, None])[:, 0, :]
    return out


def _simulate_cot(c: CommoditySim, cal: np.ndarray, rng: np.random.Generator) -> CotSeries:
    """Weekly (Tuesday) commercial positions with a persistent hedging ratio."""
    tuesdays = cal[(cal.astype(np.int64) - 5) % 7 == 0]  # day 0 of the epoch is a Thursday
    n = len(tuesdays)
    h = c.hedging_mean + lfilter([1.0], [1.0, -0.95], 0.03 * rng.standard_normal(n))
    h = np.clip(h, -0.95, 0.95)
    total = np.rint(c.cot_total * rng.lognormal(0.0, 0.1, n))
    short = np.rint(total * (1 + h) / 2)
    return CotSeries(c.commodity_id, tuesdays, short, total - short)


def write_market(market: SimulatedMarket, out_dir) -> None:
    """Write prices/<id>.csv, cot.csv, commodities.yaml and truth.csv under ``out_dir``."""
    from pathlib import Path

    from .io import write_chain, write_commodity_spec, write_cot

    out = Path(out_dir)
    (out / "prices").mkdir(parents=True, exist_ok=True)
    for cid in sorted(market.chains):
        write_chain(market.chains[cid], out / "prices" / f"{cid}.csv")
    if market.cot:
        write_cot(market.cot, out / "cot.csv")
    write_commodity_spec(market.spec(), out / "commodities.yaml")
    truth = market.truth.copy()
    truth["date"] = truth["date"].dt.strftime("%Y-%m-%d")
    truth.to_csv(out / "truth.csv", index=False, float_format="%.12g")
