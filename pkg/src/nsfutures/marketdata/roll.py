"""Roll schedule, per-day curve panels and open-interest diagnostics.

Location 1 is the nearest contract that has not yet reached its roll cutoff:
the close of the last trading day in the month before the contract's expiry
month. Locations 2..K are the following live contracts in expiry order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import Unavailable
from .types import DAYS_PER_MONTH, ContractChain, CurveSnapshot, as_day, as_days

# Contracts inspected beyond the first unexpired one when locating K live
# contracts; only matters for chains with very irregular listing dates.
_BAND_SLACK = 36


def cutoffs_from_calendar(expiries: np.ndarray, cal: np.ndarray) -> np.ndarray:
    """Per-contract roll cutoff: the last trading day in ``cal`` of the month
    preceding the expiry month. A contract is live on ``t`` iff ``t`` is
    strictly earlier than its cutoff (the mapping switches at that close)."""
    expiry_month = expiries.astype("datetime64[M]")
    month_start = expiry_month.astype("datetime64[D]")
    prev_start = (expiry_month - 1).astype("datetime64[D]")
    # months the data does not fully cover fall back to the last business day
    cutoff = np.busday_offset(month_start - 1, 0, roll="backward")
    if len(cal):
        pos = np.searchsorted(cal, month_start, side="left")
        idx = pos - 1
        last = cal[np.clip(idx, 0, None)]
        use = (idx >= 0) & (last >= prev_start) & (pos < len(cal))
        cutoff[use] = last[use]
    return cutoff


def roll_cutoffs(chain: ContractChain) -> np.ndarray:
    return cutoffs_from_calendar(chain.expiries, chain.calendar())


def schedule_arrays(days: np.ndarray, cutoffs: np.ndarray, firsts: np.ndarray, depth: int) -> np.ndarray:
    """(T, depth) contract indices of the live contracts on each day, -1 if missing.

    ``cutoffs`` and ``firsts`` are per contract in expiry order.
    """
    T, J = len(days), len(cutoffs)
    out = np.full((T, depth), -1, dtype=np.int64)
    if not (J and T):
        return out
    j0 = np.searchsorted(cutoffs, days, side="right")
    width = min(J, depth + _BAND_SLACK)
    cand = j0[:, None] + np.arange(width)[None, :]
    inside = cand < J
    cand_c = np.minimum(cand, J - 1)
    live = inside & (firsts[cand_c] <= days[:, None]) & (days[:, None] < cutoffs[cand_c])
    rank = np.cumsum(live, axis=1)
    for k in range(depth):
        hit = live & (rank == k + 1)
        has = hit.any(axis=1)
        pos = np.argmax(hit, axis=1)
        out[has, k] = cand_c[has, pos[has]]
    return out


@dataclass(frozen=True, eq=False)
class RollSchedule:
    """Per-day mapping from curve location to contract."""

    commodity_id: str
    dates: pd.DatetimeIndex
    contract: np.ndarray  # (T, K) contract index into chain.contracts, -1 if none
    codes: tuple

    @property
    def depth(self) -> int:
        return self.contract.shape[1]

    @property
    def complete(self) -> np.ndarray:
        """True on days with K live contracts; incomplete days are excluded downstream."""
        return np.all(self.contract >= 0, axis=1)

    @property
    def roll_days(self) -> pd.DatetimeIndex:
        changed = np.any(self.contract[1:] != self.contract[:-1], axis=1)
        return self.dates[1:][changed]

    def mapping(self, date) -> dict:
        t = self.dates.get_loc(pd.Timestamp(date))
        return {k + 1: (self.codes[j] if j >= 0 else None) for k, j in enumerate(self.contract[t])}

    def to_frame(self) -> pd.DataFrame:
        codes = np.array(list(self.codes) + [None], dtype=object)
        return pd.DataFrame(
            codes[self.contract], index=self.dates, columns=range(1, self.depth + 1)
        )


def roll_schedule(chain: ContractChain, depth: int = 4, dates=None) -> RollSchedule:
    """Location -> contract mapping for each date (default: the chain's calendar)."""
    days = chain.calendar() if dates is None else as_days(dates)
    firsts = np.array([c.first_date if len(c) else c.expiry_date for c in chain.contracts], dtype="datetime64[D]")
    out = schedule_arrays(days, roll_cutoffs(chain), firsts, depth)
    return RollSchedule(chain.commodity_id, pd.DatetimeIndex(days).as_unit("ns"), out, tuple(chain.codes))


@dataclass(frozen=True, eq=False)
class CurvePanel:
    """Location-indexed prices of one commodity over a date grid.

    ``next_price[t, k]`` is the price on ``dates[t + 1]`` of the contract that
    sits at location ``k`` on ``dates[t]``, so ``returns`` never straddle a roll.
    """

    commodity_id: str
    sector: str
    multiplier: float
    tick_size: float
    dates: pd.DatetimeIndex
    contract: np.ndarray
    codes: tuple
    price: np.ndarray
    next_price: np.ndarray
    maturity_days: np.ndarray
    volume: np.ndarray
    open_interest: np.ndarray
    next_volume: np.ndarray

    @property
    def depth(self) -> int:
        return self.contract.shape[1]

    def available(self, depth: int | None = None) -> np.ndarray:
        k = self.depth if depth is None else depth
        return np.all(np.isfinite(self.price[:, :k]), axis=1) & np.all(self.contract[:, :k] >= 0, axis=1)

    @property
    def maturity_months(self) -> np.ndarray:
        return self.maturity_days / DAYS_PER_MONTH

    @property
    def returns(self) -> np.ndarray:
        """Return from ``t`` to ``t + 1`` of the contract held at (t, k); NaN if unpriced."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.next_price / self.price - 1.0

    def location_returns(self, location: int = 1) -> pd.Series:
        """Daily excess returns of the rolling ``location`` position, dated at the end of the holding day."""
        r = self.returns[:, location - 1]
        out = np.full(len(self.dates), np.nan)
        out[1:] = r[:-1]
        return pd.Series(out, index=self.dates, name=self.commodity_id)

    def dollar_volume(self, location: int = 1) -> pd.Series:
        """Volume x settle x multiplier of the contract that earned each day's return."""
        k = location - 1
        cal = self.dates
        vol = np.full(len(cal), np.nan)
        # volume on day t of the contract held from t-1 to t
        vol[1:] = self.next_volume[:-1, k] * self.next_price[:-1, k] * self.multiplier
        return pd.Series(vol, index=cal, name=self.commodity_id)

    def snapshot(self, t: int, depth: int | None = None) -> CurveSnapshot:
        k = self.depth if depth is None else depth
        if not self.available(k)[t]:
            raise Unavailable(f"{self.commodity_id} {self.dates[t].date()}: snapshot unavailable at depth {k}")
        codes = [self.codes[j] for j in self.contract[t, :k]]
        return CurveSnapshot.from_arrays(self.dates[t], self.commodity_id, self.maturity_days[t, :k], self.price[t, :k], codes)


def _lookup(chain: ContractChain, days: np.ndarray):
    """Return a function (contract_idx, date_idx) -> (settle, volume, oi)."""
    tab = chain.long_table()
    T = len(days)
    gi = np.searchsorted(days, tab["date"])
    ok = (gi < T) & (days[np.minimum(gi, max(T - 1, 0))] == tab["date"]) if T else np.zeros(len(gi), bool)
    keys = tab["contract"][ok].astype(np.int64) * (T + 1) + gi[ok]
    settle, volume, oi = tab["settle"][ok], tab["volume"][ok], tab["open_interest"][ok]

    def get(cidx, tidx):
        cidx = np.asarray(cidx, dtype=np.int64)
        tidx = np.asarray(tidx, dtype=np.int64)
        q = cidx * (T + 1) + tidx
        pos = np.searchsorted(keys, q)
        pos_c = np.minimum(pos, max(len(keys) - 1, 0))
        found = (cidx >= 0) & (tidx >= 0) & (tidx < T) & (pos < len(keys))
        if len(keys):
            found &= keys[pos_c] == q
        nan = np.full(q.shape, np.nan)
        if not len(keys):
            return nan, nan.copy(), nan.copy()
        return (np.where(found, settle[pos_c], np.nan), np.where(found, volume[pos_c], np.nan), np.where(found, oi[pos_c], np.nan))

    return get


def curve_panel(chain: ContractChain, depth: int = 4, dates=None) -> CurvePanel:
    """Build the location-indexed price panel of ``chain`` on ``dates``."""
    sched = roll_schedule(chain, depth, dates)
    days = as_days(sched.dates)
    T = len(days)
    get = _lookup(chain, days)
    tix = np.broadcast_to(np.arange(T)[:, None], sched.contract.shape)
    price, volume, oi = get(sched.contract, tix)
    next_price, next_volume, _ = get(sched.contract, tix + 1)
    expiries = chain.expiries
    if len(expiries):
        exp = expiries[np.maximum(sched.contract, 0)]
        mdays = (exp - days[:, None]).astype(np.int64).astype(float)
        mdays[sched.contract < 0] = np.nan
    else:
        mdays = np.full(sched.contract.shape, np.nan)
    panel = CurvePanel(
        chain.commodity_id, chain.sector, chain.multiplier, chain.tick_size,
        sched.dates, sched.contract, sched.codes, price, next_price, mdays, volume, oi, next_volume,
    )
    return panel


def snapshot(chain: ContractChain, date, depth: int = 4) -> CurveSnapshot:
    """Curve cross-section of ``chain`` on ``date`` with ``depth`` locations."""
    panel = curve_panel(chain, depth, [as_day(date)])
    return panel.snapshot(0)


def open_interest_profile(chain: ContractChain, max_depth: int = 12) -> pd.DataFrame:
    """Average share of open interest by curve position, plus cumulative share.

    Each day ranks the contracts with a row that day by expiry and keeps the
    first ``max_depth``; days whose total open interest is zero are skipped.
    """
    tab = chain.long_table()
    frame = pd.DataFrame({"date": tab["date"], "contract": tab["contract"], "oi": tab["open_interest"]})
    frame = frame.sort_values(["date", "contract"], kind="stable")
    frame["rank"] = frame.groupby("date").cumcount()
    frame = frame[frame["rank"] < max_depth]
    wide = frame.pivot(index="date", columns="rank", values="oi").reindex(columns=range(max_depth)).fillna(0.0)
    total = wide.sum(axis=1)
    wide = wide[total > 0]
    shares = wide.div(wide.sum(axis=1), axis=0).mean(axis=0).to_numpy() if len(wide) else np.zeros(max_depth)
    out = pd.DataFrame(
        {"share": shares, "cumulative_share": np.cumsum(shares)},
        index=pd.Index(range(1, max_depth + 1), name="location"),
    )
    if len(wide):
        cum = np.minimum(out["cumulative_share"].to_numpy(), 1.0)
        cum[-1] = 1.0
        out["cumulative_share"] = cum
    return out


def open_interest_table(chains, max_depth: int = 12) -> pd.DataFrame:
    """Per-commodity cumulative OI shares; the ``average`` row is the cross-sectional mean."""
    rows = {cid: open_interest_profile(ch, max_depth)["cumulative_share"] for cid, ch in sorted(chains.items())}
    table = pd.DataFrame(rows).T
    table.loc["average"] = table.mean(axis=0)
    return table
