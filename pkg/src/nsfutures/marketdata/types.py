"""Containers for futures chains, curve snapshots and CoT positions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import DataError, DomainError

SECTORS = ("Energy", "Grains", "Industrials", "Meats", "Metals", "Oilseeds", "Softs")

DAYS_PER_MONTH = 30.4375


def as_day(value) -> np.datetime64:
    return np.datetime64(pd.Timestamp(value).date(), "D")


def as_days(values) -> np.ndarray:
    return np.asarray(pd.DatetimeIndex(values).values.astype("datetime64[D]"))


@dataclass(frozen=True, eq=False)
class ContractSeries:
    """Daily settle/volume/open-interest rows of one futures contract."""

    commodity_id: str
    contract_code: str
    expiry_date: np.datetime64
    dates: np.ndarray
    settle: np.ndarray
    volume: np.ndarray
    open_interest: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "expiry_date", as_day(self.expiry_date))
        dates = as_days(self.dates) if len(self.dates) else np.array([], dtype="datetime64[D]")
        object.__setattr__(self, "dates", dates)
        for name in ("settle", "volume", "open_interest"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != dates.shape:
                raise DataError(f"{self.contract_code}: {name} length {arr.shape} != dates {dates.shape}")
            object.__setattr__(self, name, arr)
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError(f"{self.contract_code}: dates not strictly increasing")
        if not np.all(self.settle > 0):
            raise DataError(f"{self.contract_code}: non-positive settle price")
        if np.any(self.volume < 0) or np.any(self.open_interest < 0):
            raise DataError(f"{self.contract_code}: negative volume or open interest")
        if len(dates) and dates[-1] > self.expiry_date:
            raise DataError(f"{self.contract_code}: rows after expiry {self.expiry_date}")

    def __len__(self):
        return len(self.dates)

    @property
    def first_date(self) -> np.datetime64:
        return self.dates[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"settle": self.settle, "volume": self.volume, "open_interest": self.open_interest},
            index=pd.DatetimeIndex(self.dates, name="date").as_unit("ns"),
        )


@dataclass(frozen=True, eq=False)
class ContractChain:
    commodity_id: str
    sector: str
    contracts: tuple
    multiplier: float
    tick_size: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        contracts = tuple(sorted(self.contracts, key=lambda c: (c.expiry_date, c.contract_code)))
        object.__setattr__(self, "contracts", contracts)
        if self.sector not in SECTORS:
            raise DataError(f"{self.commodity_id}: unknown sector {self.sector!r}")
        if not self.multiplier > 0 or not self.tick_size > 0:
            raise DataError(f"{self.commodity_id}: multiplier and tick_size must be positive")
        codes = [c.contract_code for c in contracts]
        if len(set(codes)) != len(codes):
            raise DataError(f"{self.commodity_id}: duplicate contract codes")

    def __len__(self):
        return len(self.contracts)

    @property
    def codes(self) -> list[str]:
        return [c.contract_code for c in self.contracts]

    @property
    def expiries(self) -> np.ndarray:
        return np.array([c.expiry_date for c in self.contracts], dtype="datetime64[D]")

    def calendar(self) -> np.ndarray:
        """Sorted union of the dates any contract traded."""
        if "calendar" not in self._cache:
            if self.contracts:
                cal = np.unique(np.concatenate([c.dates for c in self.contracts]))
            else:
                cal = np.array([], dtype="datetime64[D]")
            self._cache["calendar"] = cal
        return self._cache["calendar"]

    def long_table(self) -> dict:
        """Concatenated rows keyed by (contract index, date), sorted."""
        if "long" not in self._cache:
            n = [len(c) for c in self.contracts]
            self._cache["long"] = {
                "contract": np.repeat(np.arange(len(self.contracts)), n),
                "date": np.concatenate([c.dates for c in self.contracts]) if n else np.array([], "datetime64[D]"),
                "settle": np.concatenate([c.settle for c in self.contracts]) if n else np.array([]),
                "volume": np.concatenate([c.volume for c in self.contracts]) if n else np.array([]),
                "open_interest": np.concatenate([c.open_interest for c in self.contracts]) if n else np.array([]),
            }
        return self._cache["long"]


@dataclass(frozen=True)
class CurvePoint:
    location: int
    maturity_months: float
    maturity_days: int
    price: float
    contract_code: str = ""


@dataclass(frozen=True)
class CurveSnapshot:
    """One commodity-day cross-section of the futures curve."""

    date: pd.Timestamp
    commodity_id: str
    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if [p.location for p in pts] != list(range(1, len(pts) + 1)):
            raise DataError("snapshot locations must be consecutive from 1")
        m = np.array([p.maturity_days for p in pts])
        if np.any(m <= 0) or np.any(np.diff(m) <= 0):
            raise DataError("snapshot maturities must be positive and strictly increasing")
        if any(not p.price > 0 for p in pts):
            raise DataError("snapshot prices must be positive")

    @classmethod
    def from_arrays(cls, date, commodity_id, maturity_days, prices, codes=None):
        maturity_days = np.asarray(maturity_days, dtype=int)
        prices = np.asarray(prices, dtype=float)
        codes = codes if codes is not None else [""] * len(prices)
        points = tuple(
            CurvePoint(k + 1, float(d) / DAYS_PER_MONTH, int(d), float(p), str(c))
            for k, (d, p, c) in enumerate(zip(maturity_days, prices, codes))
        )
        return cls(pd.Timestamp(date), commodity_id, points)

    @classmethod
    def from_months(cls, maturity_months: Sequence[float], prices, date="2000-01-03", commodity_id="x"):
        """Build a snapshot directly from (real-valued) maturities in months."""
        months = np.asarray(maturity_months, dtype=float)
        points = tuple(
            CurvePoint(k + 1, float(m), max(int(round(m * DAYS_PER_MONTH)), 1), float(p))
            for k, (m, p) in enumerate(zip(months, np.asarray(prices, dtype=float)))
        )
        if np.any(months <= 0) or np.any(np.diff(months) <= 0):
            raise DataError("snapshot maturities must be positive and strictly increasing")
        return cls(pd.Timestamp(date), commodity_id, points)

    def __len__(self):
        return len(self.points)

    @property
    def maturities(self) -> np.ndarray:
        return np.array([p.maturity_months for p in self.points])

    @property
    def prices(self) -> np.ndarray:
        return np.array([p.price for p in self.points])


@dataclass(frozen=True, eq=False)
class CotSeries:
    """Weekly commercial short/long positions for one commodity."""

    commodity_id: str
    dates: np.ndarray
    commercial_short: np.ndarray
    commercial_long: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", as_days(self.dates))
        for name in ("commercial_short", "commercial_long"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr < 0):
                raise DataError(f"{self.commodity_id}: negative {name}")
            object.__setattr__(self, name, arr)
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise DataError(f"{self.commodity_id}: CoT dates not strictly increasing")

    def hedging_ratio(self) -> pd.Series:
        """(S - L) / (S + L) per week; NaN where S + L = 0."""
        total = self.commercial_short + self.commercial_long
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(total > 0, (self.commercial_short - self.commercial_long) / total, np.nan)
        return pd.Series(ratio, index=pd.DatetimeIndex(self.dates).as_unit("ns"))


def excess_return(price_now: float, price_prev: float) -> float:
    """One-day excess return F_t / F_{t-1} - 1 of a single contract."""
    if not price_now > 0 or not price_prev > 0:
        raise DomainError(f"prices must be positive, got {price_now!r}, {price_prev!r}")
    return price_now / price_prev - 1.0
