"""Dated cross-sectional signal panels.

Every panel is a date x commodity table with NaN gaps wherever the input
window is incomplete. Panels built from curve prices take a mapping
``{commodity_id: CurvePanel}`` on a common date grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .marketdata.roll import CurvePanel

DELTA_KINDS = {"L": "DBL", "S": "DBS", "C": "DBC"}
CHARACTERISTICS = ("MOM", "CARRY", "HP", "SKEW", "BMOM", "RB", "LIQ", "CURVEM")
MONTHLY_KINDS = ("MOM", "BMOM", "CURVEM")

D1 = 252  # trading days in the SKEW window
D2 = 42  # trading days in the LIQ window
PCA_WINDOW = 5
_EIG_TOL = 1e-12


@dataclass(frozen=True)
class SignalPanel:
    kind: str
    values: pd.DataFrame

    def __post_init__(self):
        vals = self.values.sort_index().sort_index(axis=1)
        vals.index = pd.DatetimeIndex(vals.index, name="date").as_unit("ns")
        vals.columns.name = "commodity"
        object.__setattr__(self, "values", vals.astype(float))

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.values.index

    @property
    def commodities(self) -> list:
        return list(self.values.columns)

    def to_long(self) -> pd.DataFrame:
        out = self.values.stack().rename("value").reset_index()
        out.insert(2, "kind", self.kind)
        return out[["date", "commodity", "kind", "value"]]

    def to_csv(self, path) -> None:
        out = self.to_long()
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out.to_csv(path, index=False, float_format="%.12g")

    def restrict(self, commodities=None, start=None, end=None) -> "SignalPanel":
        vals = self.values
        if commodities is not None:
            vals = vals[[c for c in vals.columns if c in set(commodities)]]
        return SignalPanel(self.kind, vals.loc[start:end])


def _grid(panels) -> pd.DatetimeIndex:
    idx = pd.DatetimeIndex([])
    for p in panels.values():
        idx = idx.union(p.dates)
    return idx


def _frame(panels, fn, dates=None) -> pd.DataFrame:
    dates = _grid(panels) if dates is None else pd.DatetimeIndex(dates)
    cols = {cid: pd.Series(fn(p), index=p.dates).reindex(dates) for cid, p in sorted(panels.items())}
    return pd.DataFrame(cols, index=dates)


# -- NS-based signals ---------------------------------------------------------


def delta_beta(fits, which: str, dates=None) -> SignalPanel:
    """Day-over-day change of beta_level/slope/curvature; gap if either day is missing.

    ``fits`` is a :class:`~nsfutures.nscurve.FitPanel`; the date grid defaults
    to every date the panel saw (fitted or gapped).
    """
    column = {"L": "beta_level", "S": "beta_slope", "C": "beta_curvature"}.get(which)
    if column is None:
        raise ConfigError(f"delta_beta: which must be L, S or C, got {which!r}")
    if dates is None:
        dates = pd.DatetimeIndex(pd.concat([fits.fits["date"], fits.gaps["date"]]).unique()).sort_values()
    wide = fits.wide(column, dates)
    return SignalPanel(DELTA_KINDS[which], wide.diff())


def smooth(panel: SignalPanel, window: int) -> SignalPanel:
    """Trailing unweighted mean over ``window`` days; any gap in the window gives a gap."""
    if window < 1:
        raise ConfigError("smoothing window must be >= 1")
    if window == 1:
        return panel
    vals = panel.values.rolling(window, min_periods=window).mean()
    return SignalPanel(f"{panel.kind}_MA{window}", vals)


def slope_diff(panels, dates=None) -> SignalPanel:
    """Change in F1 - F4 between consecutive dates."""

    def fn(p: CurvePanel):
        ok = p.available(4)
        s = np.where(ok, p.price[:, 0] - p.price[:, 3], np.nan)
        out = np.full(len(s), np.nan)
        out[1:] = s[1:] - s[:-1]
        return out

    return SignalPanel("DS", _frame(panels, fn, dates))


def _pc2_direction(prices: np.ndarray, window: int) -> np.ndarray:
    """(T, 4) oriented second principal direction of the trailing price window; NaN on gaps."""
    T = len(prices)
    out = np.full((T, 4), np.nan)
    if T < window:
        return out
    win = sliding_window_view(prices, window, axis=0)  # (T-w+1, 4, w)
    good = np.all(np.isfinite(win), axis=(1, 2))
    dev = win - win.mean(axis=2, keepdims=True)
    cov = np.einsum("tiw,tjw->tij", dev, dev) / (window - 1)
    cov[~good] = np.eye(4)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    l1, l2, l3 = evals[:, 3], evals[:, 2], evals[:, 1]
    tol = _EIG_TOL * np.abs(l1)
    distinct = (l1 > 0) & (l1 - l2 > tol) & (l2 - l3 > tol)
    v = evecs[:, :, 2]
    tilt = v[:, 0] - v[:, 3]
    v = v * np.sign(tilt)[:, None]
    keep = good & distinct & (tilt != 0)
    out[window - 1:][keep] = v[keep]
    return out


def pca_slope(panels, window: int = PCA_WINDOW, dates=None) -> SignalPanel:
    """Change in the projection of the 4-location price vector on the second PC.

    The PC is estimated from the covariance of the ``window`` trailing days of
    prices (ending at ``t``) and oriented so front-minus-fourth loading is
    positive. Near-repeated eigenvalues make the direction ambiguous and give
    a gap.
    """

    def fn(p: CurvePanel):
        price = np.where(p.available(4)[:, None], p.price[:, :4], np.nan)
        v = _pc2_direction(price, window)
        out = np.full(len(price), np.nan)
        out[1:] = np.einsum("tk,tk->t", v[1:], price[1:] - price[:-1])
        return out

    return SignalPanel("DPC2", _frame(panels, fn, dates))


def roll_yield(panels, k: int = 2, dates=None, kind: str | None = None) -> SignalPanel:
    """F1 / Fk - 1; commodities whose panel is shallower than ``k`` are excluded."""
    if k < 2:
        raise ConfigError("roll yield needs k >= 2")
    use = {cid: p for cid, p in panels.items() if p.depth >= k}

    def fn(p: CurvePanel):
        ok = p.available(k)
        return np.where(ok, p.price[:, 0] / p.price[:, k - 1] - 1.0, np.nan)

    frame = _frame(use, fn, dates if dates is not None else _grid(panels))
    return SignalPanel(kind or f"RY{k}", frame)


# -- returns helpers ------------------------------------------------------------


def daily_returns(panels, location: int = 1, dates=None) -> pd.DataFrame:
    """Rolling excess returns of each commodity's ``location`` contract, dated at the end of the day."""
    return _frame(panels, lambda p: p.location_returns(location).to_numpy(), dates)


def month_ends(dates) -> pd.DatetimeIndex:
    """Last trading date of each calendar month in ``dates``."""
    dates = pd.DatetimeIndex(dates)
    s = pd.Series(dates, index=dates)
    return pd.DatetimeIndex(s.groupby(dates.to_period("M")).max().to_numpy()).as_unit("ns")


def monthly_returns(daily: pd.DataFrame) -> pd.DataFrame:
    """Compound daily returns within calendar months, dated at each month's last trading day.

    A month is valid only if every date of the grid in that month carries a return.
    """
    months = daily.index.to_period("M")
    grouped = (1.0 + daily).groupby(months)
    prod = grouped.prod(min_count=1) - 1.0
    complete = daily.notna().groupby(months).all()
    out = prod.where(complete)
    out.index = month_ends(daily.index)
    return out


def _compound12(monthly: pd.DataFrame) -> pd.DataFrame:
    return (1.0 + monthly).rolling(12, min_periods=12).apply(np.prod, raw=True)


# -- characteristics ------------------------------------------------------------


def _skew(r: np.ndarray, window: int) -> np.ndarray:
    out = np.full(len(r), np.nan)
    if len(r) < window:
        return out
    win = sliding_window_view(r, window)
    mu = win.mean(axis=1, keepdims=True)
    dev = win - mu
    sd = np.sqrt((dev**2).mean(axis=1))
    m3 = (dev**3).mean(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sk = np.where(sd > 0, m3 / sd**3, np.nan)
    sk[~np.all(np.isfinite(win), axis=1)] = np.nan
    out[window - 1:] = sk
    return out


def _liq(dollar_volume: np.ndarray, r: np.ndarray, window: int) -> np.ndarray:
    out = np.full(len(r), np.nan)
    if len(r) < window:
        return out
    wr = sliding_window_view(r, window)
    wv = sliding_window_view(dollar_volume, window)
    complete = np.all(np.isfinite(wr), axis=1) & np.all(np.isfinite(wv), axis=1)
    nz = np.isfinite(wr) & (wr != 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(nz, wv / np.abs(np.where(nz, wr, 1.0)), 0.0)
    n = nz.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(n > 0, ratio.sum(axis=1) / n, np.nan)
    avg[~complete] = np.nan
    out[window - 1:] = avg
    return out


def hedging_pressure(cot, dates, weeks: int = 52) -> pd.DataFrame:
    """Trailing 52-week mean of (S - L)/(S + L), as of each date (latest report on or before it)."""
    dates = pd.DatetimeIndex(dates)
    cols = {}
    for cid, series in sorted(cot.items()):
        hp = series.hedging_ratio().rolling(weeks, min_periods=weeks).mean()
        cols[cid] = hp.reindex(dates, method="ffill") if len(hp) else pd.Series(np.nan, index=dates)
    return pd.DataFrame(cols, index=dates)


def characteristic(kind: str, panels, cot=None, m: int = 2, dates=None) -> SignalPanel:
    """Commodity characteristic used to sort the monthly factor portfolios.

    MOM, BMOM and CURVEM are dated at month ends; the others are daily.
    """
    kind = kind.upper()
    grid = _grid(panels) if dates is None else pd.DatetimeIndex(dates)
    if kind == "MOM":
        vals = _compound12(monthly_returns(daily_returns(panels, 1, grid))) - 1.0
    elif kind == "CURVEM":
        if m < 1 or any(p.depth < m for p in panels.values()):
            raise ConfigError(f"CURVEM with m={m} needs curve panels of depth >= {m}")
        vals = _compound12(monthly_returns(daily_returns(panels, m, grid))) - 1.0
    elif kind == "BMOM":
        if any(p.depth < 2 for p in panels.values()):
            raise ConfigError("BMOM needs curve panels of depth >= 2")
        front = _compound12(monthly_returns(daily_returns(panels, 1, grid)))
        second = _compound12(monthly_returns(daily_returns(panels, 2, grid)))
        vals = front - second
    elif kind == "CARRY":
        return roll_yield(panels, 2, grid, kind="CARRY")
    elif kind == "RB":
        if any(p.depth < 3 for p in panels.values()):
            raise ConfigError("RB needs curve panels of depth >= 3")

        def fn(p: CurvePanel):
            ok = p.available(3)
            F, T = p.price[:, :3], p.maturity_days[:, :3]
            with np.errstate(invalid="ignore", divide="ignore"):
                rb = np.log(F[:, 0] / F[:, 1]) / (T[:, 1] - T[:, 0]) - np.log(F[:, 1] / F[:, 2]) / (T[:, 2] - T[:, 1])
            return np.where(ok, rb, np.nan)

        vals = _frame(panels, fn, grid)
    elif kind == "SKEW":
        vals = _frame(panels, lambda p: _skew(p.location_returns(1).to_numpy(), D1), grid)
    elif kind == "LIQ":

        def fn(p: CurvePanel):
            r = p.location_returns(1).to_numpy()
            dv = p.dollar_volume(1).to_numpy()
            return _liq(dv, r, D2)

        vals = _frame(panels, fn, grid)
    elif kind == "HP":
        if not cot:
            raise ConfigError("HP needs CoT data")
        vals = hedging_pressure({c: s for c, s in cot.items() if c in panels}, grid).reindex(columns=sorted(panels))
    else:
        raise ConfigError(f"unknown characteristic {kind!r}")
    return SignalPanel(kind, vals)
