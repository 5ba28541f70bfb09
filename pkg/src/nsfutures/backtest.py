"""Gross returns, turnover and cost-adjusted returns of weight books.

Weights set at the close of ``t`` earn the contracts' returns to the next
grid date. Turnover at ``t`` compares the new weights with the previous
holdings drifted by their own returns (not renormalised), contract by
contract, so a roll counts both the exiting and the entering contract. The
rebalancing cost at ``t`` is charged to the return dated ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError
from .marketdata.roll import curve_panel
from .portfolio import (
    NAIVE_FAMILIES,
    NS_FAMILIES,
    StrategySpec,
    WeightBook,
    build_book,
)

SCENARIOS = ("TC1", "TC2", "TC3")
TC2_RATE = 0.000167
SUBSAMPLE_CUTS = ("2000-12-31", "2009-03-31")


@dataclass(frozen=True)
class CostModel:
    """Per-trade cost as a fraction of notional.

    TC1 = C / (F * M); TC2 = flat rate; TC3 = (C + n * tick * M) / (F * M).
    ``ZERO`` charges nothing.
    """

    scenario: str = "TC1"
    commission: float = 1.5
    flat_rate: float = TC2_RATE
    n_ticks: float = 0.25

    def __post_init__(self):
        if self.scenario not in SCENARIOS + ("ZERO",):
            raise ConfigError(f"unknown cost scenario {self.scenario!r}")
        if min(self.commission, self.flat_rate, self.n_ticks) < 0:
            raise ConfigError("cost parameters must be non-negative")

    @property
    def label(self) -> str:
        return self.scenario.lower()


DEFAULT_COSTS = (CostModel("TC1"), CostModel("TC2"), CostModel("TC3"))


def unit_cost(model: CostModel, multiplier, tick_size, price) -> np.ndarray:
    """Cost per unit of traded notional for contracts at ``price``."""
    price = np.asarray(price, dtype=float)
    if np.any(price <= 0):
        raise DataError("unit cost needs positive prices")
    if model.scenario == "ZERO":
        return np.zeros_like(price)
    if model.scenario == "TC2":
        return np.full_like(price, model.flat_rate)
    notional = price * multiplier
    if model.scenario == "TC1":
        return model.commission / notional
    return (model.commission + model.n_ticks * tick_size * multiplier) / notional


@dataclass(frozen=True, eq=False)
class BacktestResult:
    label: str
    gross: pd.Series
    turnover: pd.Series
    net: dict  # scenario label -> pd.Series
    flags: pd.DataFrame  # degenerate / roll / missing per date
    holdings: np.ndarray = field(repr=False, default=None)  # (T, N, K) held after each close
    book: WeightBook | None = field(repr=False, default=None)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.gross.index

    def net_of(self, scenario: str) -> pd.Series:
        return self.net[scenario.lower()]

    def to_frame(self) -> pd.DataFrame:
        out = pd.DataFrame({"gross": self.gross, "turnover": self.turnover})
        for name in ("tc1", "tc2", "tc3"):
            out[f"net_{name}"] = self.net.get(name, pd.Series(np.nan, index=self.gross.index))
        tags = self.flags[["degenerate", "roll", "missing"]]
        out["flags"] = [";".join(c for c, v in zip(tags.columns, row) if v) for row in tags.to_numpy()]
        out.index.name = "date"
        return out

    def to_csv(self, path) -> None:
        out = self.to_frame().reset_index()
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out.to_csv(path, index=False, float_format="%.15g")

    @classmethod
    def from_csv(cls, path, label: str | None = None) -> "BacktestResult":
        frame = pd.read_csv(path, parse_dates=["date"], keep_default_na=False, na_values=[""], float_precision="round_trip")
        frame = frame.set_index("date")
        flags_txt = frame["flags"].fillna("").astype(str)
        flags = pd.DataFrame({k: flags_txt.str.contains(k) for k in ("degenerate", "roll", "missing")}, index=frame.index)
        net = {k: frame[f"net_{k}"] for k in ("tc1", "tc2", "tc3")}
        from pathlib import Path

        return cls(label or Path(path).stem, frame["gross"], frame["turnover"], net, flags)

    def slice(self, start=None, end=None) -> "BacktestResult":
        s = slice(pd.Timestamp(start) if start else None, pd.Timestamp(end) if end else None)
        return BacktestResult(self.label, self.gross.loc[s], self.turnover.loc[s],
                              {k: v.loc[s] for k, v in self.net.items()}, self.flags.loc[s], book=self.book)


def _stack(book: WeightBook, panels) -> dict:
    """Location arrays (T, N, K) of the book's commodities on the book's dates."""
    K = book.depth
    arrays = {"contract": [], "price": [], "next_price": []}
    mult, tick = [], []
    for cid in book.commodities:
        p = panels.get(cid)
        if p is None:
            raise ConfigError(f"no curve panel for {cid!r}")
        if p.depth < K:
            raise ConfigError(f"curve panel for {cid} has depth {p.depth} < {K}")
        if not p.dates.as_unit("ns").equals(book.dates.as_unit("ns")):
            raise ConfigError(f"curve panel for {cid} is on a different date grid than the book")
        arrays["contract"].append(p.contract[:, :K])
        arrays["price"].append(p.price[:, :K])
        arrays["next_price"].append(p.next_price[:, :K])
        mult.append(p.multiplier)
        tick.append(p.tick_size)
    out = {k: np.stack(v, axis=1) if v else np.zeros((len(book.dates), 0, K)) for k, v in arrays.items()}
    out["multiplier"] = np.asarray(mult, dtype=float)
    out["tick_size"] = np.asarray(tick, dtype=float)
    return out


def _carry_holdings(book: WeightBook, C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Holdings of a book that only trades on its rebalance dates.

    Between rebalances positions drift with their returns; when a location's
    contract rolls, the drifted weight moves to the location's new contract.
    """
    T = len(book.dates)
    H = np.zeros_like(book.weights)
    h = np.zeros(book.weights.shape[1:])
    r0 = np.nan_to_num(R, nan=0.0)
    for t in range(T):
        if t:
            h = h * (1.0 + r0[t - 1])
            h[C[t] < 0] = 0.0
        if book.rebalance[t]:
            h = book.weights[t].copy()
        H[t] = h
    return H


def evaluate(book: WeightBook, panels, costs=DEFAULT_COSTS, two_ticket: bool = False,
             label: str | None = None) -> BacktestResult:
    """Gross, turnover and net series of ``book`` priced off ``panels`` ({id: CurvePanel})."""
    st = _stack(book, panels)
    C, P, NP = st["contract"], st["price"], st["next_price"]
    with np.errstate(invalid="ignore", divide="ignore"):
        R = NP / P - 1.0
    if book.rebalance.all():
        H = np.where(C >= 0, book.weights, 0.0)
    else:
        H = _carry_holdings(book, C, R)
    unpriced = (H != 0) & ~np.isfinite(P)
    if unpriced.any():
        t, n, _ = np.argwhere(unpriced)[0]
        raise DataError(f"{book.commodities[n]} {book.dates[t].date()}: weight on an unpriced contract")

    held = H[:-1] != 0
    missing_leg = held & ~np.isfinite(R[:-1])
    r_used = np.where(missing_leg, 0.0, np.nan_to_num(R[:-1], nan=0.0))
    gross = np.einsum("tnk,tnk->t", H[:-1], r_used)

    # drifted holdings at t on the contracts held at t-1; a missing price closes at the last mark
    D = H[:-1] * (1.0 + r_used)
    exit_price = np.where(np.isfinite(NP[:-1]), NP[:-1], P[:-1])
    same = (C[:-1, :, :, None] == C[1:, :, None, :]) & (C[:-1, :, :, None] >= 0)
    carried = np.einsum("tnij,tni->tnj", same.astype(float), D)
    to_new = np.abs(H[1:] - carried)
    exits = ~same.any(axis=3)
    to_old = np.abs(D) * exits
    turnover = to_new.sum(axis=(1, 2)) + to_old.sum(axis=(1, 2))
    roll = (exits & (D != 0)).any(axis=(1, 2))

    factor = 0.5 * (0.5 if (book.spec is not None and book.spec.is_spread and not two_ticket) else 1.0)
    mult = st["multiplier"][None, :, None]
    tick = st["tick_size"][None, :, None]
    P_new = np.where(np.isfinite(P[1:]), P[1:], 1.0)
    P_old = np.where(np.isfinite(exit_price), exit_price, 1.0)
    net = {}
    for model in costs:
        c_new = unit_cost(model, mult, tick, P_new)
        c_old = unit_cost(model, mult, tick, P_old)
        drag = factor * ((to_new * c_new).sum(axis=(1, 2)) + (to_old * c_old).sum(axis=(1, 2)))
        net[model.label] = gross - drag

    # report from the first date after the book first holds a position
    active = np.flatnonzero(np.any(H != 0, axis=(1, 2)))
    if not len(active):
        raise ConfigError("book never holds a position")
    first = active[0]
    idx = book.dates[1:]
    keep = slice(first, None)
    flags = pd.DataFrame({
        "degenerate": book.degenerate[1:],
        "roll": roll,
        "missing": missing_leg.any(axis=(1, 2)),
    }, index=idx).iloc[keep]
    name = label or (book.spec.label if book.spec is not None else "book")
    return BacktestResult(
        name,
        pd.Series(gross, index=idx, name="gross").iloc[keep],
        pd.Series(turnover, index=idx, name="turnover").iloc[keep],
        {k: pd.Series(v, index=idx, name=f"net_{k}").iloc[keep] for k, v in net.items()},
        flags,
        H,
        book,
    )


def gross_returns(book: WeightBook, panels) -> pd.Series:
    return evaluate(book, panels, costs=()).gross


def turnover(book: WeightBook, panels) -> pd.Series:
    return evaluate(book, panels, costs=()).turnover


def net_returns(gross, turnover_components, unit_costs, factor: float = 0.5) -> pd.Series:
    """Net return: gross minus ``factor`` x sum of per-contract turnover x unit cost.

    ``turnover_components`` and ``unit_costs`` are date x contract tables
    aligned with ``gross``.
    """
    to = pd.DataFrame(turnover_components).reindex(gross.index).fillna(0.0)
    tc = pd.DataFrame(unit_costs).reindex(index=gross.index, columns=to.columns).fillna(0.0)
    return gross - factor * (to * tc).sum(axis=1)


# -- end-to-end -----------------------------------------------------------------


def subsample_masks(dates, cuts=SUBSAMPLE_CUTS) -> dict:
    """Label -> boolean mask for the periods between consecutive cut dates (cut dates inclusive on the left period)."""
    dates = pd.DatetimeIndex(dates)
    edges = [None] + [pd.Timestamp(c) for c in cuts] + [None]
    out = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = np.ones(len(dates), bool)
        if lo is not None:
            m &= dates > lo
        if hi is not None:
            m &= dates <= hi
        lab = f"{'start' if lo is None else lo.date()}..{'end' if hi is None else hi.date()}"
        out[lab] = m
    return out


def select_universe(chains, sectors=None, commodities=None) -> dict:
    out = dict(chains)
    if commodities:
        unknown = sorted(set(commodities) - set(out))
        if unknown:
            raise ConfigError(f"unknown commodities: {', '.join(unknown)}")
        out = {c: out[c] for c in commodities}
    if sectors:
        sectors = {sectors} if isinstance(sectors, str) else set(sectors)
        out = {c: ch for c, ch in out.items() if ch.sector in sectors}
    if not out:
        raise ConfigError("empty universe after filtering")
    return dict(sorted(out.items()))


def union_calendar(chains) -> pd.DatetimeIndex:
    cals = [ch.calendar() for ch in chains.values()]
    return pd.DatetimeIndex(np.unique(np.concatenate(cals))).as_unit("ns") if cals else pd.DatetimeIndex([])


class Pipeline:
    """Shared curve panels, fits and signals for running several strategies on one universe."""

    def __init__(self, chains, cot=None, threads: int = 1, curvem_m: int = 2):
        self.chains = dict(sorted(chains.items()))
        self.cot = cot or {}
        self.threads = threads
        self.curvem_m = curvem_m
        self.dates = union_calendar(self.chains)
        self._panels = {}
        self._fits = {}
        self._signals = {}

    def panels(self, depth: int) -> dict:
        have = [d for d in self._panels if d >= depth]
        if have:
            return self._panels[min(have)]
        out = {cid: curve_panel(ch, depth, self.dates) for cid, ch in self.chains.items()}
        self._panels[depth] = out
        return out

    def fits(self, depth: int = 4, seasonal=None):
        from .nscurve import fit_panel

        key = (depth, str(seasonal))
        if key not in self._fits:
            self._fits[key] = fit_panel(self.panels(depth), self.dates, depth, seasonal=seasonal, threads=self.threads)
        return self._fits[key]

    def signal(self, spec: StrategySpec):
        from . import signals as sg

        fam = spec.family
        if fam in NS_FAMILIES:
            key = (fam, spec.signal, spec.depth, str(spec.seasonal), spec.smooth)
            if key in self._signals:
                return self._signals[key]
            if spec.signal == "ns":
                sig = sg.delta_beta(self.fits(spec.depth, spec.seasonal), fam, self.dates)
            elif spec.signal == "DS":
                sig = sg.slope_diff(self.panels(4), self.dates)
            elif spec.signal == "DPC2":
                sig = sg.pca_slope(self.panels(4), dates=self.dates)
            else:
                k = int(spec.signal[2:])
                sig = sg.roll_yield(self.panels(k), k, self.dates)
            sig = sg.smooth(sig, spec.smooth)
        elif fam in NAIVE_FAMILIES:
            return None
        else:
            key = (fam,)
            if key in self._signals:
                return self._signals[key]
            sig = sg.characteristic(fam, self.panels(max(spec.locations, 3)), self.cot, m=self.curvem_m, dates=self.dates)
        self._signals[key] = sig
        return sig

    def available(self, depth: int) -> pd.DataFrame:
        panels = self.panels(depth)
        return pd.DataFrame({cid: p.available(depth) for cid, p in panels.items()}, index=self.dates)

    def book(self, spec: StrategySpec) -> WeightBook:
        need = spec.locations
        avail = self.available(max(need, len(spec.pattern)))
        book = build_book(spec, self.signal(spec), available=avail, dates=self.dates)
        # trade only where the traded locations are priced
        priced = self.available(len(spec.pattern)).reindex(index=book.dates, columns=list(book.commodities)).to_numpy(bool)
        if np.any((np.abs(book.weights).sum(axis=2) > 0) & ~priced):
            raise DataError(f"{spec.label}: signal on a commodity-day without traded prices")
        return book

    def run(self, spec: StrategySpec, costs=DEFAULT_COSTS, start=None, end=None, two_ticket: bool = False) -> BacktestResult:
        book = self.book(spec)
        mask = np.ones(len(book.dates), bool)
        if start is not None:
            mask &= book.dates >= pd.Timestamp(start)
        if end is not None:
            mask &= book.dates <= pd.Timestamp(end)
        if not mask.any():
            raise ConfigError("date range excludes every trading day")
        book = book.restrict(mask)
        res = evaluate(book, self.panels(book.depth), costs, two_ticket, spec.label)
        if end is not None:
            res = res.slice(end=end)
        return res


def run(spec: StrategySpec, chains, costs=DEFAULT_COSTS, start=None, end=None, sectors=None,
        commodities=None, cot=None, two_ticket: bool = False, threads: int = 1) -> BacktestResult:
    """Signals -> book -> gross/turnover/net for one strategy on a filtered universe."""
    universe = select_universe(chains, sectors, commodities)
    return Pipeline(universe, cot, threads).run(spec, costs, start, end, two_ticket)
