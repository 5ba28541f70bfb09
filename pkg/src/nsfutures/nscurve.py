"""Nelson-Siegel fits of futures curves.

Given the decay ``lam`` the model is linear in its betas, so every fit here is
an exact least-squares solve. ``lam`` itself is pinned analytically: it puts
the peak of the curvature loading at the average maturity of the snapshot.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DomainError, FitError
from .marketdata.roll import CurvePanel, curve_panel
from .marketdata.types import CurveSnapshot

OMEGA = 2.0 * math.pi / 12.0
THETAS = tuple(range(1, 13))
NINE = frozenset(
    {"corn", "cotton", "feeder_cattle", "gasoline", "heating_oil", "live_cattle", "live_hogs", "soybeans", "wheat"}
)
FIT_COLUMNS = ["date", "commodity", "beta_level", "beta_slope", "beta_curvature", "beta_seasonal", "theta", "lambda", "r2"]

_RCOND = 1e-10
_TIE_TOL = 1e-12


def _curvature_peak_equation(x: float) -> float:
    return math.exp(-x) * (1.0 + x + x * x) - 1.0


def _bisect_peak(lo: float = 1.0, hi: float = 2.0, tol: float = 1e-12) -> float:
    """Unique positive root of exp(-x)(1 + x + x^2) = 1, by bisection.

    The function is positive below the root and negative above it.
    """
    f = _curvature_peak_equation
    if not f(lo) > 0 > f(hi):
        raise ArithmeticError("root not bracketed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    root = lo if abs(f(lo)) <= abs(f(hi)) else hi
    if abs(f(root)) >= tol:
        raise ArithmeticError("bisection failed to converge")
    return root


CURVATURE_PEAK = _bisect_peak()


def decay_factor(avg_maturity_months):
    """Decay that maximizes the curvature loading at ``avg_maturity_months``."""
    m = np.asarray(avg_maturity_months, dtype=float)
    if np.any(~(m > 0)):
        raise DomainError("average maturity must be positive")
    lam = CURVATURE_PEAK / m
    return float(lam) if lam.ndim == 0 else lam


@dataclass(frozen=True)
class ComponentSet:
    include_level: bool = True
    include_slope: bool = True
    include_curvature: bool = True

    def __post_init__(self):
        if not self.include_level:
            raise ConfigError("the level component is always required")

    @property
    def names(self) -> list[str]:
        out = ["level"]
        if self.include_slope:
            out.append("slope")
        if self.include_curvature:
            out.append("curvature")
        return out

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def label(self) -> str:
        return "+".join(n[0].upper() for n in self.names)


FULL = ComponentSet()
LEVEL_SLOPE = ComponentSet(include_curvature=False)
LEVEL_CURVATURE = ComponentSet(include_slope=False)


def _slope_curvature(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        slope = np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-xs) / xs)
        curv = np.where(small, x / 2.0 - x * x / 3.0, slope - np.exp(-xs))
    return slope, curv


def ns_loadings(lam, maturities, components: ComponentSet = FULL) -> np.ndarray:
    """Design matrix of the NS model, last axis = (level, slope, curvature).

    ``lam`` may be a scalar or an array broadcastable against ``maturities``
    without its last axis (one decay per curve).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("decay must be positive")
    m = np.asarray(maturities, dtype=float)
    x = (lam[..., None] if lam.ndim else lam) * m
    slope, curv = _slope_curvature(x)
    cols = [np.ones_like(x)]
    if components.include_slope:
        cols.append(slope)
    if components.include_curvature:
        cols.append(curv)
    return np.stack(cols, axis=-1)


def seasonal_loading(maturities, theta) -> np.ndarray:
    return np.cos(OMEGA * np.asarray(maturities, dtype=float) - OMEGA * theta)


def ns_curve(maturities, beta_level, beta_slope, beta_curvature, lam, beta_seasonal=0.0, theta=1):
    """Evaluate the (optionally seasonal) NS price curve."""
    X = ns_loadings(lam, maturities)
    out = X[..., 0] * beta_level + X[..., 1] * beta_slope + X[..., 2] * beta_curvature
    if np.any(np.asarray(beta_seasonal) != 0):
        out = out + beta_seasonal * np.cos(OMEGA * np.asarray(maturities, float) - OMEGA * theta)
    return out


def _r_squared(y, resid):
    ybar = y.mean(axis=-1, keepdims=True)
    tss = np.sum((y - ybar) ** 2, axis=-1)
    rss = np.sum(resid**2, axis=-1)
    scale = y.shape[-1] * (1e-13 * np.max(np.abs(y), axis=-1)) ** 2
    tss_zero = tss <= scale
    rss_zero = rss <= scale
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = 1.0 - rss / np.where(tss_zero, 1.0, tss)
    r2 = np.where(tss_zero, np.where(rss_zero, 1.0, 0.0), r2)
    return r2


def _batch_ols(X, y):
    """Least squares per leading index via SVD; flags rank-deficient systems."""
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    ok = s[..., -1] > _RCOND * s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(s > _RCOND * s[..., :1], 1.0 / s, 0.0)
    uty = np.einsum("...kp,...k->...p", U, y)
    beta = np.einsum("...pq,...p->...q", Vt, inv * uty)
    resid = y - np.einsum("...kp,...p->...k", X, beta)
    return beta, resid, ok


def fit_ns_arrays(maturity_months, prices, components: ComponentSet = FULL) -> dict:
    """Vectorised NS fit of ``T`` curves given as (T, K) arrays.

    Returns a dict with ``betas`` (T, 3; omitted components are 0), ``lambda``,
    ``r2``, ``residuals`` and ``ok`` (False where the design is rank deficient).
    """
    m = np.atleast_2d(np.asarray(maturity_months, dtype=float))
    y = np.atleast_2d(np.asarray(prices, dtype=float))
    T, K = y.shape
    if K < components.size:
        raise FitError(f"need at least {components.size} points, got {K}")
    lam = decay_factor(m.mean(axis=1)) if T else np.empty(0)
    lam = np.atleast_1d(lam)
    X = ns_loadings(lam, m, components)
    beta, resid, ok = _batch_ols(X, y)
    full = np.zeros((T, 3))
    idx = [0] + ([1] if components.include_slope else []) + ([2] if components.include_curvature else [])
    full[:, idx] = beta
    return {"betas": full, "lambda": lam, "r2": _r_squared(y, resid), "residuals": resid, "ok": ok}


def fit_ns_seasonal_arrays(maturity_months, prices) -> dict:
    """Vectorised seasonal NS fit; scans theta = 1..12 and keeps the best R^2.

    theta and theta + 6 span the same model with opposite amplitude signs, so
    R^2 ties are resolved toward a non-negative seasonal beta, then the
    smallest theta.
    """
    m = np.atleast_2d(np.asarray(maturity_months, dtype=float))
    y = np.atleast_2d(np.asarray(prices, dtype=float))
    T, K = y.shape
    if K < 5:
        raise FitError(f"seasonal model needs at least 5 points, got {K}")
    lam = np.atleast_1d(decay_factor(m.mean(axis=1)))
    X0 = ns_loadings(lam, m, FULL)
    r2_all = np.empty((12, T))
    betas = np.empty((12, T, 4))
    resids = np.empty((12, T, K))
    oks = np.empty((12, T), bool)
    for i, theta in enumerate(THETAS):
        Xs = np.concatenate([X0, np.cos(OMEGA * m - OMEGA * theta)[..., None]], axis=-1)
        b, r, ok = _batch_ols(Xs, y)
        betas[i], resids[i], oks[i] = b, r, ok
        r2_all[i] = np.where(ok, _r_squared(y, r), -np.inf)
    best = np.max(r2_all, axis=0)
    tied = r2_all >= best - _TIE_TOL * np.maximum(np.abs(best), 1.0)
    score = np.where(tied, np.where(betas[..., 3] >= 0, 0, 1), 2)
    # lexicographic: tied first, non-negative amplitude next, smallest theta last
    choice = np.argmin(score * 100 + np.arange(12)[:, None], axis=0)
    cols = np.arange(T)
    return {
        "betas": betas[choice, cols],
        "theta": np.asarray(THETAS)[choice],
        "lambda": lam,
        "r2": r2_all[choice, cols],
        "residuals": resids[choice, cols],
        "ok": oks[choice, cols],
        "r2_by_theta": r2_all.T,
    }


@dataclass(frozen=True)
class NSFit:
    date: pd.Timestamp
    commodity_id: str
    beta_level: float
    beta_slope: float
    beta_curvature: float
    lambda_: float
    r_squared: float
    residuals: np.ndarray = field(repr=False)
    components: ComponentSet = FULL

    @property
    def betas(self) -> np.ndarray:
        return np.array([self.beta_level, self.beta_slope, self.beta_curvature])


@dataclass(frozen=True)
class SeasonalNSFit(NSFit):
    beta_seasonal: float = 0.0
    theta: int = 1
    omega: float = OMEGA


def fit_ns(snapshot: CurveSnapshot, components: ComponentSet = FULL) -> NSFit:
    """Least-squares NS fit of one snapshot at the curvature-peak decay."""
    res = fit_ns_arrays(snapshot.maturities[None, :], snapshot.prices[None, :], components)
    if not res["ok"][0]:
        raise FitError(f"{snapshot.commodity_id} {snapshot.date.date()}: rank-deficient NS design")
    b = res["betas"][0]
    return NSFit(snapshot.date, snapshot.commodity_id, float(b[0]), float(b[1]), float(b[2]),
                 float(res["lambda"][0]), float(res["r2"][0]), res["residuals"][0], components)


def fit_ns_seasonal(snapshot: CurveSnapshot) -> SeasonalNSFit:
    if len(snapshot) < 5:
        raise ConfigError("seasonal NS needs a curve of at least 5 contracts")
    res = fit_ns_seasonal_arrays(snapshot.maturities[None, :], snapshot.prices[None, :])
    if not res["ok"][0]:
        raise FitError(f"{snapshot.commodity_id} {snapshot.date.date()}: rank-deficient seasonal design")
    b = res["betas"][0]
    return SeasonalNSFit(snapshot.date, snapshot.commodity_id, float(b[0]), float(b[1]), float(b[2]),
                         float(res["lambda"][0]), float(res["r2"][0]), res["residuals"][0], FULL,
                         beta_seasonal=float(b[3]), theta=int(res["theta"][0]))


@dataclass
class FitPanel:
    """Fits for every available commodity-day, plus a record of the gaps."""

    fits: pd.DataFrame
    gaps: pd.DataFrame
    depth: int = 4
    components: ComponentSet = FULL

    def wide(self, column: str = "beta_slope", dates=None) -> pd.DataFrame:
        out = self.fits.pivot(index="date", columns="commodity", values=column)
        if dates is not None:
            out = out.reindex(pd.DatetimeIndex(dates))
        return out.sort_index(axis=1)

    def __len__(self):
        return len(self.fits)

    def to_csv(self, path) -> None:
        frame = self.fits[FIT_COLUMNS].copy()
        frame["date"] = pd.DatetimeIndex(frame["date"]).strftime("%Y-%m-%d")
        frame["theta"] = frame["theta"].astype("Int64")
        frame.to_csv(path, index=False, float_format="%.12g")


def _seasonal_ids(seasonal, ids):
    if seasonal is None or seasonal is False or seasonal == "none":
        return set()
    if seasonal == "all" or seasonal is True:
        return set(ids)
    if seasonal == "nine":
        return set(ids) & NINE
    return set(seasonal)


def _fit_one(panel: CurvePanel, depth: int, components: ComponentSet, seasonal: bool):
    avail = panel.available(depth)
    idx = np.flatnonzero(avail)
    m = panel.maturity_months[idx, :depth]
    p = panel.price[idx, :depth]
    if seasonal:
        res = fit_ns_seasonal_arrays(m, p) if len(idx) else None
    else:
        res = fit_ns_arrays(m, p, components) if len(idx) else None
    cid = panel.commodity_id
    n = len(idx)
    if n:
        betas = res["betas"]
        frame = pd.DataFrame({
            "date": panel.dates[idx],
            "commodity": cid,
            "beta_level": betas[:, 0],
            "beta_slope": betas[:, 1],
            "beta_curvature": betas[:, 2],
            "beta_seasonal": betas[:, 3] if seasonal else np.nan,
            "theta": res["theta"].astype(float) if seasonal else np.nan,
            "lambda": res["lambda"],
            "r2": res["r2"],
        })
        ok = res["ok"]
        bad = frame.loc[~ok, ["date", "commodity"]].assign(reason="rank_deficient")
        frame = frame.loc[ok]
    else:
        frame = pd.DataFrame(columns=FIT_COLUMNS)
        bad = pd.DataFrame(columns=["date", "commodity", "reason"])
    miss = pd.DataFrame({"date": panel.dates[~avail], "commodity": cid, "reason": "unavailable"})
    return frame, pd.concat([bad, miss], ignore_index=True)


def fit_panel(chains, dates=None, depth: int = 4, components: ComponentSet = FULL,
              seasonal=None, threads: int = 1) -> FitPanel:
    """Fit every commodity-day of ``chains`` (mapping id -> ContractChain or CurvePanel).

    ``seasonal`` selects which commodities use the seasonal model: ``None``,
    ``"nine"``, ``"all"`` or an explicit collection of ids.
    """
    ids = sorted(chains)
    seas = _seasonal_ids(seasonal, ids)
    if seas and depth < 5:
        raise ConfigError("seasonal NS requires depth >= 5 (12 is the reference setting)")
    if dates is None:
        dates = _union_calendar(chains)

    def work(cid):
        src = chains[cid]
        panel = src if isinstance(src, CurvePanel) and src.depth >= depth else curve_panel(src, depth, dates)
        return _fit_one(panel, depth, components, cid in seas)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, ids))
    else:
        parts = [work(cid) for cid in ids]
    fits = [f for f, _ in parts if len(f)]
    gaps = [g for _, g in parts if len(g)]
    fits = pd.concat(fits, ignore_index=True) if fits else pd.DataFrame(columns=FIT_COLUMNS)
    gaps = pd.concat(gaps, ignore_index=True) if gaps else pd.DataFrame(columns=["date", "commodity", "reason"])
    fits = fits.sort_values(["date", "commodity"], kind="stable").reset_index(drop=True)
    gaps = gaps.sort_values(["date", "commodity"], kind="stable").reset_index(drop=True)
    return FitPanel(fits, gaps, depth, components)


def _union_calendar(chains) -> pd.DatetimeIndex:
    cals = []
    for src in chains.values():
        cals.append(np.asarray(src.dates.values.astype("datetime64[D]")) if isinstance(src, CurvePanel) else src.calendar())
    if not cals:
        return pd.DatetimeIndex([])
    return pd.DatetimeIndex(np.unique(np.concatenate(cals))).as_unit("ns")


def restricted_r2_table(chains, depth: int = 4, dates=None) -> pd.DataFrame:
    """Average R^2 per commodity for the full, L+S and L+C specifications."""
    out = {}
    for comp in (FULL, LEVEL_SLOPE, LEVEL_CURVATURE):
        fp = fit_panel(chains, dates=dates, depth=depth, components=comp)
        out[comp.label] = fp.fits.groupby("commodity")["r2"].mean()
    table = pd.DataFrame(out)
    table.loc["average"] = table.mean(axis=0)
    return table
