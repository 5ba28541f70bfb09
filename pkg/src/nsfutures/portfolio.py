"""Weight books for the level/slope/curvature strategies, benchmarks and factors,
plus the dispersion timing overlay and 50/50 blends of return streams.

A :class:`WeightBook` stores, for each date ``t``, the weights set at the close
of ``t`` on curve locations ``1..K`` of each commodity. Daily books rebalance
every date; monthly books only carry targets on rebalance dates and drift in
between (the backtest engine does the carrying).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError
from .signals import SignalPanel, month_ends

NS_FAMILIES = ("L", "S", "C")
NAIVE_FAMILIES = ("LAVG", "SAVG", "CAVG", "AVG")
FACTOR_FAMILIES = ("MOM", "CARRY", "HP", "SKEW", "BMOM", "RB", "LIQ", "CURVEM")

# +1: high characteristic goes long; -1: low characteristic goes long
FACTOR_DIRECTION = {"MOM": 1, "CARRY": 1, "HP": 1, "BMOM": 1, "RB": 1, "CURVEM": 1, "SKEW": -1, "LIQ": -1}

GEOMETRIES = ("outright", "slope", "butterfly")
_DEFAULT_GEOMETRY = {"L": "outright", "S": "slope", "C": "butterfly", "LAVG": "outright",
                     "SAVG": "slope", "CAVG": "butterfly", "AVG": "outright"}


def geometry_pattern(geometry: str, far: int = 4) -> np.ndarray:
    """Per-commodity contract proportions over locations 1..K; absolute values sum to 1.

    A long slope spread is long the front and short location ``far``; a long
    butterfly is long location 2 twice against the front and location 4.
    """
    if geometry == "outright":
        return np.array([1.0])
    if geometry == "slope":
        if far < 2:
            raise ConfigError("slope spread needs a far location >= 2")
        p = np.zeros(far)
        p[0], p[far - 1] = 0.5, -0.5
        return p
    if geometry == "butterfly":
        return np.array([-0.25, 0.5, 0.0, -0.25])
    raise ConfigError(f"unknown geometry {geometry!r}")


@dataclass(frozen=True)
class StrategySpec:
    """What to trade and how.

    ``family`` is L, S, C, a naive benchmark (LAVG, SAVG, CAVG, AVG) or a
    characteristic factor (MOM, CARRY, ...). ``mode`` is ``cs``
    (cross-sectional) or ``ts`` (time-series). ``far`` is the far location of
    a slope spread.

    For L/S/C, ``signal`` selects the sorting signal: ``ns`` (daily beta
    change from fits on ``depth`` contracts, optionally seasonal and
    ``smooth``-day averaged), ``DS`` or ``DPC2`` (slope family only) or
    ``RY<k>`` (level family only: outright fronts sorted on roll yield).
    """

    family: str
    mode: str = "cs"
    geometry: str | None = None
    far: int = 4
    rebalance: str | None = None
    name: str | None = None
    signal: str = "ns"
    depth: int = 4
    smooth: int = 1
    seasonal: object = None

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        if fam not in NS_FAMILIES + NAIVE_FAMILIES + FACTOR_FAMILIES:
            raise ConfigError(f"unknown strategy family {self.family!r}")
        if self.mode not in ("cs", "ts"):
            raise ConfigError(f"mode must be 'cs' or 'ts', got {self.mode!r}")
        geom = self.geometry or _DEFAULT_GEOMETRY.get(fam, "outright")
        object.__setattr__(self, "geometry", geom)
        expected = _DEFAULT_GEOMETRY.get(fam, "outright")
        if geom != expected:
            raise ConfigError(f"family {fam} trades {expected} positions, not {geom}")
        monthly = fam in FACTOR_FAMILIES or fam == "AVG"
        reb = self.rebalance or ("monthly" if monthly else "daily")
        if reb != ("monthly" if monthly else "daily"):
            raise ConfigError(f"family {fam} rebalances {'monthly' if monthly else 'daily'}")
        object.__setattr__(self, "rebalance", reb)
        if fam in FACTOR_FAMILIES + NAIVE_FAMILIES and self.mode != "cs":
            raise ConfigError(f"family {fam} has no time-series mode")
        geometry_pattern(geom, self.far)
        if self.depth not in (4, 6, 12):
            raise ConfigError(f"curve depth must be 4, 6 or 12, got {self.depth}")
        if self.smooth not in (1, 3, 5):
            raise ConfigError(f"smoothing window must be 1, 3 or 5, got {self.smooth}")
        if self.far > max(self.depth, 4):
            raise ConfigError(f"far location {self.far} beyond curve depth {self.depth}")
        sig = self.signal
        if sig != "ns" and fam not in NS_FAMILIES:
            raise ConfigError(f"family {fam} takes no signal option")
        if sig in ("DS", "DPC2") and fam != "S":
            raise ConfigError(f"signal {sig} drives the slope family only")
        if sig.startswith("RY"):
            if fam != "L" or sig[2:] not in ("2", "3", "6", "12"):
                raise ConfigError(f"signal {sig}: roll-yield signals are RY2/RY3/RY6/RY12 on the level family")
        elif sig not in ("ns", "DS", "DPC2"):
            raise ConfigError(f"unknown signal {sig!r}")
        if self.seasonal not in (None, False, "none") and self.depth < 5:
            raise ConfigError("seasonal fits need depth 6 or 12")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = self.family
        if self.signal != "ns":
            base = self.signal if self.signal.startswith("RY") else f"{base}_{self.signal}"
        if self.mode == "ts":
            base += "_TS"
        if self.depth != 4:
            base += f"_K{self.depth}"
        if self.seasonal not in (None, False, "none"):
            base += "_SEAS" if self.seasonal != "nine" else "_NINE"
        if self.smooth != 1:
            base += f"_MA{self.smooth}"
        if self.geometry == "slope" and self.far != 4:
            base += f"_1{self.far}"
        return base

    @property
    def locations(self) -> int:
        """Curve depth the strategy needs: traded locations, fit depth and signal inputs."""
        need = len(self.pattern)
        if self.family in NS_FAMILIES:
            if self.signal == "ns":
                need = max(need, self.depth)
            elif self.signal in ("DS", "DPC2"):
                need = max(need, 4)
            else:
                need = max(need, int(self.signal[2:]))
        elif self.family == "BMOM" or self.family == "CURVEM":
            need = max(need, 2)
        elif self.family == "RB":
            need = max(need, 3)
        elif self.family == "CARRY":
            need = max(need, 2)
        return need

    @property
    def pattern(self) -> np.ndarray:
        return geometry_pattern(self.geometry, self.far)

    @property
    def is_spread(self) -> bool:
        return self.geometry in ("slope", "butterfly")


@dataclass(frozen=True, eq=False)
class WeightBook:
    dates: pd.DatetimeIndex
    commodities: tuple
    weights: np.ndarray  # (T, N, K)
    legs: np.ndarray  # (T, N): +1 long leg, -1 short leg, 0 out
    degenerate: np.ndarray  # (T,) one leg empty
    rebalance: np.ndarray  # (T,) dates carrying target weights
    spec: StrategySpec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return self.weights.shape[2]

    @property
    def populated(self) -> np.ndarray:
        return np.any(self.weights != 0, axis=(1, 2))

    def gross_exposure(self) -> np.ndarray:
        return np.abs(self.weights).sum(axis=(1, 2))

    def leg_capital(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute capital in the long and short legs per date."""
        a = np.abs(self.weights).sum(axis=2)
        return (a * (self.legs > 0)).sum(axis=1), (a * (self.legs < 0)).sum(axis=1)

    def restrict(self, mask) -> "WeightBook":
        """Zero the weights on dates where ``mask`` is False."""
        mask = np.asarray(mask, bool)
        w = np.where(mask[:, None, None], self.weights, 0.0)
        legs = np.where(mask[:, None], self.legs, 0)
        return WeightBook(self.dates, self.commodities, w, legs, self.degenerate & mask,
                          self.rebalance, self.spec, dict(self.meta))

    def to_frame(self) -> pd.DataFrame:
        t, n, k = np.nonzero(self.weights)
        leg = np.where(self.legs[t, n] > 0, "long", "short")
        return pd.DataFrame({
            "date": self.dates[t],
            "commodity": np.asarray(self.commodities, dtype=object)[n],
            "location": k + 1,
            "weight": self.weights[t, n, k],
            "leg": leg,
        })

    def to_csv(self, path) -> None:
        out = self.to_frame()
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out.to_csv(path, index=False, float_format="%.15g")


def _signal_array(signal, dates=None, commodities=None):
    vals = signal.values if isinstance(signal, SignalPanel) else pd.DataFrame(signal)
    if dates is not None:
        vals = vals.reindex(pd.DatetimeIndex(dates))
    if commodities is not None:
        vals = vals.reindex(columns=list(commodities))
    return vals.index, tuple(vals.columns), vals.to_numpy(dtype=float)


def _book(dates, comms, sign, capital, pattern, rebalance, spec, degenerate=None):
    w = (sign * capital)[:, :, None] * pattern[None, None, :]
    legs = np.sign(sign).astype(np.int8)
    if degenerate is None:
        n_long = (legs > 0).sum(axis=1)
        n_short = (legs < 0).sum(axis=1)
        degenerate = (n_long > 0) != (n_short > 0)
    return WeightBook(pd.DatetimeIndex(dates), comms, w, legs, np.asarray(degenerate, bool),
                      np.asarray(rebalance, bool), spec)


def build_cs_book(signal, spec: StrategySpec, dates=None, commodities=None) -> WeightBook:
    """Cross-sectional L/S/C book.

    Positive signals form the long leg. For L, negative signals form the short
    leg and zeros stay out; for S and C every remaining commodity (signal <= 0)
    is short. Each leg carries 0.5 of capital split equally across its names.
    """
    if spec.mode != "cs":
        raise ConfigError("build_cs_book needs a cross-sectional spec")
    dates, comms, s = _signal_array(signal, dates, commodities)
    finite = np.isfinite(s)
    long_ = finite & (s > 0)
    short = finite & ((s < 0) if spec.family == "L" else (s <= 0))
    sign = long_.astype(float) - short.astype(float)
    n_long = long_.sum(axis=1, keepdims=True)
    n_short = short.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(long_, 0.5 / n_long, 0.0) + np.where(short, 0.5 / n_short, 0.0)
    return _book(dates, comms, sign, cap, spec.pattern, np.ones(len(dates), bool), spec)


def build_ts_book(signal, spec: StrategySpec, dates=None, commodities=None) -> WeightBook:
    """Time-series book: capital 1/N per commodity with a nonzero signal, direction sign(signal)."""
    if spec.mode != "ts":
        raise ConfigError("build_ts_book needs a time-series spec")
    dates, comms, s = _signal_array(signal, dates, commodities)
    active = np.isfinite(s) & (s != 0)
    sign = np.where(active, np.sign(np.where(active, s, 0.0)), 0.0)
    n = active.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(active, 1.0 / n, 0.0)
    return _book(dates, comms, sign, cap, spec.pattern, np.ones(len(dates), bool), spec,
                 degenerate=np.zeros(len(dates), bool))


def build_naive_book(kind: str, available: pd.DataFrame) -> WeightBook:
    """Equal-weight long-only benchmark over the commodities available each date.

    ``available`` is a date x commodity boolean table (the tradable universe).
    LAVG/SAVG/CAVG rebalance daily; AVG rebalances at month ends.
    """
    spec = StrategySpec(kind)
    if spec.family not in NAIVE_FAMILIES:
        raise ConfigError(f"{kind!r} is not a naive benchmark")
    avail = available.sort_index().sort_index(axis=1)
    a = avail.to_numpy(dtype=bool)
    dates = avail.index
    if spec.rebalance == "monthly":
        reb = np.asarray(dates.isin(month_ends(dates)))
        a = a & reb[:, None]
    else:
        reb = np.ones(len(dates), bool)
    n = a.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(a, 1.0 / n, 0.0)
    return _book(dates, tuple(avail.columns), a.astype(float), cap, spec.pattern, reb, spec,
                 degenerate=np.zeros(len(dates), bool))


def build_factor_book(characteristic, kind: str | None = None, dates=None, available: pd.DataFrame | None = None) -> WeightBook:
    """Monthly median-split factor portfolio on front contracts.

    At each month end of ``dates`` the cross-section of finite characteristic
    values is sorted in the kind's direction; the first ceil(N/2) names go long
    at 0.5/n_long each and the rest short at -0.5/n_short. Equal values are
    ordered by commodity id. Months with fewer than two names stay empty.
    """
    kind = (kind or characteristic.kind).upper()
    spec = StrategySpec(kind)
    direction = FACTOR_DIRECTION[kind]
    grid = pd.DatetimeIndex(dates) if dates is not None else characteristic.values.index
    if available is not None:
        grid = grid.union(available.index) if dates is None else grid
    ends = month_ends(grid)
    vals = characteristic.values.reindex(grid)
    if available is not None:
        vals = vals.where(available.reindex(index=grid, columns=vals.columns).fillna(False).astype(bool))
    s = vals.to_numpy(dtype=float)
    T, N = s.shape
    reb = np.asarray(grid.isin(ends))
    sign = np.zeros((T, N))
    for t in np.flatnonzero(reb):
        ok = np.flatnonzero(np.isfinite(s[t]))
        if len(ok) < 2:
            continue
        order = ok[np.lexsort((ok, -direction * s[t, ok]))]
        n_long = (len(ok) + 1) // 2
        sign[t, order[:n_long]] = 1.0
        sign[t, order[n_long:]] = -1.0
    n_long = (sign > 0).sum(axis=1, keepdims=True)
    n_short = (sign < 0).sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(sign > 0, 0.5 / n_long, 0.0) + np.where(sign < 0, 0.5 / n_short, 0.0)
    return _book(grid, tuple(vals.columns), sign, cap, spec.pattern, reb, spec)


def build_book(spec: StrategySpec, signal=None, available=None, dates=None) -> WeightBook:
    """Dispatch on ``spec.family``."""
    if spec.family in NS_FAMILIES:
        if signal is None:
            raise ConfigError(f"{spec.label} needs a signal panel")
        fn = build_cs_book if spec.mode == "cs" else build_ts_book
        return fn(signal, spec, dates)
    if spec.family in NAIVE_FAMILIES:
        if available is None:
            raise ConfigError(f"{spec.label} needs an availability table")
        return build_naive_book(spec.family, available if dates is None else available.reindex(dates).fillna(False))
    return build_factor_book(signal, spec.family, dates, available)


# -- timing --------------------------------------------------------------------


def dispersion_series(fits, column: str = "beta_slope") -> pd.Series:
    """Cross-sectional sample SD (n - 1) of a fitted beta per date; NaN with fewer than two names."""
    wide = fits.wide(column) if hasattr(fits, "wide") else fits
    n = wide.notna().sum(axis=1)
    sd = wide.std(axis=1, ddof=1)
    return sd.where(n >= 2)


def dispersion(fits, date, column: str = "beta_slope") -> float:
    wide = fits.wide(column) if hasattr(fits, "wide") else fits
    row = wide.loc[pd.Timestamp(date)].dropna()
    if len(row) < 2:
        return float("nan")
    return float(row.std(ddof=1))


TIMING_WINDOWS = (3, 5, 10, 15, 22)


@dataclass(frozen=True)
class TimingResult:
    returns: pd.Series
    leverage: pd.Series  # sigma_hat_t / c applied to the return dated t + 1
    scale: float


def _trailing_mean(x: pd.Series, d: int) -> pd.Series:
    # window by window (not a running sum) so identical windows give identical means
    out = np.full(len(x), np.nan)
    if len(x) >= d:
        out[d - 1:] = np.lib.stride_tricks.sliding_window_view(x.to_numpy(), d).mean(axis=1)
    return pd.Series(out, index=x.index)


def timing_overlay(base: pd.Series, dispersions: pd.Series, d: int = 22, expanding: bool = False,
                   min_obs: int = 20) -> TimingResult:
    """Scale next-day returns by the trailing ``d``-day mean dispersion over ``c``.

    With the full-sample calibration ``c`` makes the timed series exactly as
    volatile as the base over the timed days. ``expanding=True`` recomputes
    ``c`` each day from information up to the previous day only.
    """
    if d < 1:
        raise ConfigError("timing window must be >= 1")
    base = base.astype(float)
    sig = _trailing_mean(dispersions.astype(float), d)
    # leverage known at the close of t applies to the return dated at the next grid date
    z = sig.reindex(base.index).shift(1)
    ok = z.notna() & base.notna() & (z > 0)
    z, r = z[ok], base[ok]
    if len(r) < 2:
        raise ConfigError("timing overlay has fewer than two usable days")
    zn = z / z.iloc[0]
    raw = zn * r
    if not expanding:
        with np.errstate(divide="ignore", invalid="ignore"):
            c = raw.std(ddof=1) / r.std(ddof=1)
        if not np.isfinite(c) or c <= 0:
            raise ConfigError("timing calibration undefined (zero volatility)")
        lev = zn / c
        return TimingResult(raw / c, lev, float(c * z.iloc[0]))
    # c_t from days strictly before t
    sd_raw = raw.expanding(min_periods=min_obs).std(ddof=1).shift(1)
    sd_r = r.expanding(min_periods=min_obs).std(ddof=1).shift(1)
    c = sd_raw / sd_r
    lev = (zn / c).dropna()
    return TimingResult((lev * r).dropna(), lev, float("nan"))


def timed_returns(base: pd.Series, dispersions: pd.Series, d: int = 22, expanding: bool = False) -> pd.Series:
    return timing_overlay(base, dispersions, d, expanding).returns


# -- blends --------------------------------------------------------------------


def blend(a: pd.Series, b: pd.Series) -> pd.Series:
    """50/50 mix of two return streams reset at each calendar month; sleeves drift within months."""
    both = pd.concat([a.rename("a"), b.rename("b")], axis=1, join="inner").dropna()
    if both.empty:
        raise ConfigError("blend needs overlapping dates")
    ra, rb = both["a"].to_numpy(), both["b"].to_numpy()
    month = both.index.to_period("M").to_numpy()
    out = np.empty(len(both))
    va = vb = 0.5
    for i in range(len(both)):
        if i == 0 or month[i] != month[i - 1]:
            va = vb = 0.5
        wa, wb = va / (va + vb), vb / (va + vb)
        out[i] = wa * ra[i] + wb * rb[i]
        va *= 1.0 + ra[i]
        vb *= 1.0 + rb[i]
    return pd.Series(out, index=both.index, name="blend")
