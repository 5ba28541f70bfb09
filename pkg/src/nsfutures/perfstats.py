"""Performance statistics, Newey-West regressions and conditional splits.

Daily inputs are annualised with ``n = 252`` trading days; monthly figures
compound daily returns within calendar months.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .errors import ConfigError, DomainError

TRADING_DAYS = 252
GAMMA = 5.0
Z99 = -2.32635
WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday")


def monthly_compound(returns: pd.Series) -> pd.Series:
    """Compound daily returns within calendar months, indexed by month period end."""
    r = returns.dropna()
    out = (1.0 + r).groupby(r.index.to_period("M")).prod() - 1.0
    out.index = out.index.to_timestamp(how="end").normalize()
    return out


def _moments(r: np.ndarray, bias_corrected: bool):
    if bias_corrected:
        return float(stats.skew(r, bias=False)), float(stats.kurtosis(r, bias=False))
    d = r - r.mean()
    m2 = np.mean(d**2)
    if m2 == 0:
        return 0.0, 0.0
    return float(np.mean(d**3) / m2**1.5), float(np.mean(d**4) / m2**2 - 3.0)


def cornish_fisher_var(mu: float, sigma: float, skew: float, exkurt: float, z: float = Z99) -> float:
    """99% Cornish-Fisher VaR as a positive loss fraction."""
    zcf = z + (z * z - 1) * skew / 6 + (z**3 - 3 * z) * exkurt / 24 - (2 * z**3 - 5 * z) * skew**2 / 36
    return -(mu + sigma * zcf)


def cer(returns, gamma: float = GAMMA, n: int = TRADING_DAYS) -> float:
    """Annualised power-utility certainty-equivalent return."""
    r = np.asarray(returns, dtype=float)
    if np.any(r <= -1):
        raise DomainError("CER undefined for returns <= -100%")
    if gamma == 1:
        return float(n / len(r) * np.sum(np.log1p(r)))
    return float(n / len(r) * np.sum(((1.0 + r) ** (1.0 - gamma) - 1.0) / (1.0 - gamma)))


def max_drawdown(returns) -> float:
    """Largest peak-to-trough loss of cumulative wealth, starting from a peak of 1."""
    w = np.cumprod(1.0 + np.asarray(returns, dtype=float))
    peak = np.maximum.accumulate(np.concatenate([[1.0], w]))[1:]
    return float(min(0.0, np.min(w / peak - 1.0))) if len(w) else 0.0


@dataclass(frozen=True)
class PerfSummary:
    ann_mean_geometric: float
    ann_mean_arithmetic: float
    t_mean: float
    ann_volatility: float
    ann_downside_volatility: float
    sharpe: float
    sortino: float
    omega: float
    skewness: float
    excess_kurtosis: float
    var99_cornish_fisher: float
    pct_positive_months: float
    max_drawdown: float
    cer: float
    n_obs: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(returns, n: int = TRADING_DAYS, gamma: float = GAMMA, bias_corrected: bool = False,
              lag="auto") -> PerfSummary:
    """Every performance row of the summary tables for one daily return series."""
    s = pd.Series(returns).dropna() if not isinstance(returns, pd.Series) else returns.dropna()
    r = s.to_numpy(dtype=float)
    T = len(r)
    if T < 2:
        raise ConfigError("summarize needs at least two observations")
    mean = r.mean()
    sd = r.std(ddof=1)
    geo = float(np.prod(1.0 + r) ** (n / T) - 1.0)
    vol = math.sqrt(n) * sd
    down = math.sqrt(n) * math.sqrt(np.mean(np.minimum(r, 0.0) ** 2))
    degenerate = not vol > 0
    sharpe = n * mean / vol if vol > 0 else float("nan")
    sortino = n * mean / down if down > 0 else float("nan")
    gains, losses = np.maximum(r, 0).sum(), np.maximum(-r, 0).sum()
    omega = gains / losses if losses > 0 else (float("inf") if gains > 0 else float("nan"))
    sk, ku = _moments(r, bias_corrected)
    var99 = cornish_fisher_var(mean, sd, sk, ku)
    if T >= 21 and isinstance(s.index, pd.DatetimeIndex):
        monthly = monthly_compound(s)
        pos = float((monthly > 0).mean())
    else:
        pos = float("nan")
    t_mean = float("nan") if degenerate else mean_tstat(s, lag)
    vals = [geo, n * mean, t_mean, vol, down, sharpe, sortino, omega, sk, ku, var99, pos, max_drawdown(r), cer(r, gamma, n)]
    return PerfSummary(*map(float, vals), T, degenerate)


def summary_table(results: dict, **kwargs) -> pd.DataFrame:
    """One row per named return series."""
    return pd.DataFrame({k: summarize(v, **kwargs).to_dict() for k, v in results.items()}).T


# -- Newey-West ------------------------------------------------------------------


def auto_lag(T: int) -> int:
    return int(math.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


def hac_meat(scores: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-weighted long-run covariance sum of the (T, p) score matrix (no 1/T)."""
    S = scores.T @ scores
    for l in range(1, lag + 1):
        w = 1.0 - l / (lag + 1.0)
        G = scores[l:].T @ scores[:-l]
        S += w * (G + G.T)
    return S


@dataclass(frozen=True)
class RegressionReport:
    params: pd.Series
    bse: pd.Series
    tvalues: pd.Series
    cov: pd.DataFrame
    r_squared: float
    adj_r_squared: float
    alpha_annualized: float
    resid: pd.Series = field(repr=False)
    lag: int = 0
    nobs: int = 0
    periods_per_year: int = TRADING_DAYS
    degenerate: bool = False

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({"coef": self.params, "se": self.bse, "t": self.tvalues})


def _frequency(index) -> int:
    if isinstance(index, pd.DatetimeIndex) and len(index) > 2:
        step = np.median(np.diff(index.values).astype("timedelta64[D]").astype(float))
        return 12 if step > 20 else TRADING_DAYS
    return TRADING_DAYS


def _collinear(X: np.ndarray, names) -> list:
    bad, kept = [], []
    for j in range(X.shape[1]):
        trial = X[:, kept + [j]]
        if np.linalg.matrix_rank(trial) < len(kept) + 1:
            bad.append(names[j])
        else:
            kept.append(j)
    return bad


def nw_regression(y, X=None, lag="auto", add_const: bool = True, periods_per_year: int | None = None) -> RegressionReport:
    """OLS with Bartlett-kernel HAC covariance (no small-sample scaling).

    ``lag="auto"`` uses floor(4 (T/100)^(2/9)); lag 0 is White's covariance.
    The intercept is reported annualised (x252 daily, x12 monthly).
    """
    y = pd.Series(y).astype(float) if not isinstance(y, pd.Series) else y.astype(float)
    if X is None:
        Xf = pd.DataFrame(index=y.index)
    elif isinstance(X, pd.Series):
        Xf = X.to_frame(X.name if X.name is not None else "x")
    else:
        Xf = pd.DataFrame(X)
    Xf = Xf.astype(float)
    data = pd.concat([y.rename("__y__"), Xf], axis=1, join="inner").dropna()
    yv = data["__y__"].to_numpy()
    Xd = data.drop(columns="__y__")
    if add_const:
        Xd.insert(0, "const", 1.0)
    names = list(Xd.columns)
    Xv = Xd.to_numpy()
    T, p = Xv.shape
    if p == 0:
        raise ConfigError("regression has no regressors")
    if T <= p + 1:
        raise ConfigError(f"need more than {p + 1} observations, got {T}")
    bad = _collinear(Xv, names)
    if bad:
        raise ConfigError(f"collinear regressors: {', '.join(map(str, bad))}")
    L = auto_lag(T) if lag == "auto" else int(lag)
    if L < 0 or L >= T:
        raise ConfigError(f"lag must be in [0, T), got {L}")
    beta, *_ = np.linalg.lstsq(Xv, yv, rcond=None)
    e = yv - Xv @ beta
    XtX_inv = np.linalg.inv(Xv.T @ Xv)
    cov = XtX_inv @ hac_meat(Xv * e[:, None], L) @ XtX_inv
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    rss = float(e @ e)
    degenerate = rss <= 1e-30 * max(float(yv @ yv), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    if add_const:
        tss = float(np.sum((yv - yv.mean()) ** 2))
        r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    else:
        tss = float(yv @ yv)
        r2 = 1.0 - rss / tss if tss > 0 else 1.0
    dof = T - p
    adj = 1.0 - (1.0 - r2) * (T - (1 if add_const else 0)) / dof
    ppy = periods_per_year or _frequency(data.index)
    alpha = float(beta[0] * ppy) if add_const else float("nan")
    idx = pd.Index(names)
    return RegressionReport(
        pd.Series(beta, idx), pd.Series(se, idx), pd.Series(t, idx), pd.DataFrame(cov, idx, idx),
        float(r2), float(adj), alpha, pd.Series(e, data.index), L, T, ppy, bool(degenerate),
    )


def mean_tstat(returns, lag="auto") -> float:
    """Newey-West t-statistic of the mean."""
    r = pd.Series(returns).dropna()
    rep = nw_regression(r, None, lag=lag)
    return float(rep.tvalues.iloc[0])


def spanning(strategy: pd.Series, factors, frequency: str = "daily", lag="auto") -> RegressionReport:
    """Regress a strategy's returns on factor returns; ``monthly`` compounds both first."""
    f = factors.to_frame() if isinstance(factors, pd.Series) else pd.DataFrame(factors)
    if frequency == "monthly":
        strategy = monthly_compound(strategy)
        f = pd.DataFrame({c: monthly_compound(f[c]) for c in f.columns})
        ppy = 12
    elif frequency == "daily":
        ppy = TRADING_DAYS
    else:
        raise ConfigError(f"frequency must be daily or monthly, got {frequency!r}")
    return nw_regression(strategy, f, lag=lag, periods_per_year=ppy)


# -- splits ----------------------------------------------------------------------


def align_indicator(returns: pd.Series, indicator: pd.Series) -> pd.Series:
    """Latest indicator value on or before each return date."""
    r = returns.dropna()
    ind = indicator.dropna().sort_index()
    left = pd.DataFrame({"date": r.index})
    right = pd.DataFrame({"date": ind.index, "ind": ind.to_numpy()})
    merged = pd.merge_asof(left, right, on="date", direction="backward")
    return pd.Series(merged["ind"].to_numpy(), index=r.index)


@dataclass(frozen=True)
class ConditionalResult:
    high: PerfSummary | None
    low: PerfSummary | None
    threshold: float
    n_high: int
    n_low: int
    difference: float
    t_difference: float
    flagged: bool


def conditional_perf(returns: pd.Series, indicator: pd.Series, n: int = TRADING_DAYS, lag="auto") -> ConditionalResult:
    """Split days by indicator >= / < its mean over the overlap; NW t-stat of the mean difference."""
    ind = align_indicator(returns, indicator)
    ok = ind.notna()
    r = returns.dropna()[ok]
    ind = ind[ok]
    if len(r) < 2:
        raise ConfigError("indicator does not overlap the returns")
    threshold = float(ind.mean())
    high = (ind >= threshold).to_numpy()
    rh, rl = r[high], r[~high]
    sh = summarize(rh, n) if len(rh) >= 2 else None
    sl = summarize(rl, n) if len(rl) >= 2 else None
    flagged = sh is None or sl is None
    if flagged:
        diff, t = float("nan"), float("nan")
    else:
        dummy = pd.Series(high.astype(float), index=r.index, name="high")
        rep = nw_regression(r, dummy, lag=lag)
        diff, t = float(rep.params["high"] * n), float(rep.tvalues["high"])
    return ConditionalResult(sh, sl, threshold, int(high.sum()), int((~high).sum()), diff, t, flagged)


def weekday_perf(returns: pd.Series, n: int = TRADING_DAYS, lag="auto") -> pd.DataFrame:
    """Annualised mean and NW t-statistic per weekday."""
    r = returns.dropna()
    rows = {}
    for i, day in enumerate(WEEKDAYS):
        g = r[r.index.dayofweek == i]
        if len(g) > 2 and g.std(ddof=1) > 0:
            t = mean_tstat(g, lag)
        else:
            t = float("nan")
        rows[day] = {"ann_mean": n * g.mean() if len(g) else float("nan"), "t_stat": t, "n_obs": len(g)}
    return pd.DataFrame(rows).T


def wealth_curve(returns: pd.Series, risk_free: pd.Series | None = None) -> pd.Series:
    """Value of $1 compounding excess returns plus an optional collateral return."""
    r = returns.fillna(0.0)
    rf = 0.0 if risk_free is None else risk_free.reindex(r.index).ffill().fillna(0.0)
    return (1.0 + r + rf).cumprod().rename("wealth")


# -- Sharpe ratio difference -------------------------------------------------------


def _sr_gradient(mu, m2):
    var = m2 - mu * mu
    return var, np.array([m2 / var**1.5, -0.5 * mu / var**1.5])


@dataclass(frozen=True)
class SharpeTest:
    sharpe_a: float
    sharpe_b: float
    statistic: float
    p_value: float
    paired: bool


def sharpe_difference_test(a: pd.Series, b: pd.Series, lag="auto", paired: bool | None = None,
                           n: int = TRADING_DAYS) -> SharpeTest:
    """Delta-method test of equal Sharpe ratios with Bartlett HAC moment covariance.

    Aligned samples use the joint (paired) moment vector (a, b, a^2, b^2);
    disjoint samples add two independent variances. Reported Sharpe ratios are
    annualised; the statistic is scale free.
    """
    a, b = a.dropna(), b.dropna()
    common = a.index.intersection(b.index)
    if paired is None:
        paired = len(common) >= 2
    if paired:
        a, b = a.loc[common], b.loc[common]
    if len(a) < 3 or len(b) < 3:
        raise ConfigError("Sharpe test needs at least three observations per sample")

    def sr(x):
        return x.mean() / x.std(ddof=0)

    sra, srb = float(sr(a)), float(sr(b))
    diff = sra - srb
    ann = math.sqrt(n)
    if diff == 0.0:
        return SharpeTest(sra * ann, srb * ann, 0.0, 1.0, bool(paired))
    if paired:
        x, z = a.to_numpy(), b.to_numpy()
        T = len(x)
        mu = np.array([x.mean(), z.mean(), (x * x).mean(), (z * z).mean()])
        Y = np.column_stack([x, z, x * x, z * z]) - mu
        L = auto_lag(T) if lag == "auto" else int(lag)
        psi = hac_meat(Y, L) / T
        va, ga = _sr_gradient(mu[0], mu[2])
        vb, gb = _sr_gradient(mu[1], mu[3])
        grad = np.array([ga[0], -gb[0], ga[1], -gb[1]])
        var = float(grad @ psi @ grad) / T
    else:
        var = 0.0
        for x in (a.to_numpy(), b.to_numpy()):
            T = len(x)
            mu = np.array([x.mean(), (x * x).mean()])
            Y = np.column_stack([x, x * x]) - mu
            L = auto_lag(T) if lag == "auto" else int(lag)
            psi = hac_meat(Y, L) / T
            _, g = _sr_gradient(mu[0], mu[1])
            var += float(g @ psi @ g) / T
    if not var > 0:
        return SharpeTest(sra * ann, srb * ann, float("nan"), float("nan"), bool(paired))
    stat = diff / math.sqrt(var)
    p = 2.0 * stats.norm.sf(abs(stat))
    return SharpeTest(sra * ann, srb * ann, float(stat), float(p), bool(paired))
