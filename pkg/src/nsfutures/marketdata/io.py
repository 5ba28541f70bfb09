"""CSV/YAML readers and writers for price files, CoT files and commodity specs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
import yaml

from ..errors import ConfigError, DuplicateError, ParseError
from .types import SECTORS, ContractChain, ContractSeries, CotSeries

PRICE_COLUMNS = ["date", "contract_code", "expiry_date", "settle", "volume", "open_interest"]
COT_COLUMNS = ["date", "commodity_id", "commercial_short", "commercial_long"]


def load_commodity_spec(source) -> dict:
    """Read the per-commodity ``sector``/``multiplier``/``tick_size`` table.

    ``source`` may be a path to a YAML/JSON file or an already-parsed mapping.
    """
    if isinstance(source, Mapping):
        raw = dict(source)
    else:
        with open(source) as fh:
            raw = yaml.safe_load(fh) or {}
    if "commodities" in raw and isinstance(raw["commodities"], Mapping):
        raw = dict(raw["commodities"])
    spec = {}
    for cid, entry in raw.items():
        try:
            sector = entry["sector"]
            multiplier = float(entry["multiplier"])
            tick = float(entry["tick_size"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"commodity spec for {cid!r} is incomplete: {exc}") from None
        if sector not in SECTORS:
            raise ConfigError(f"commodity {cid!r}: unknown sector {sector!r}")
        if multiplier <= 0 or tick <= 0:
            raise ConfigError(f"commodity {cid!r}: multiplier and tick_size must be positive")
        spec[str(cid)] = {"sector": sector, "multiplier": multiplier, "tick_size": tick}
    return spec


def write_commodity_spec(spec: Mapping, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump({k: dict(v) for k, v in sorted(spec.items())}, fh, sort_keys=True)


def _read_strict(path, columns) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError("empty file", path=path) from None
    if list(frame.columns) != columns:
        raise ParseError(f"header must be {','.join(columns)}, got {','.join(frame.columns)}", line=1, path=path)
    return frame


def _first_bad(mask, path, what):
    if mask.any():
        line = int(np.flatnonzero(np.asarray(mask))[0]) + 2
        raise ParseError(what, line=line, path=path)


def load_chain(path, spec, commodity_id: str | None = None) -> ContractChain:
    """Load one commodity's price CSV into a validated :class:`ContractChain`.

    The commodity id defaults to the file stem and must exist in ``spec``.
    """
    path = Path(path)
    spec = load_commodity_spec(spec)
    cid = commodity_id or path.stem
    if cid not in spec:
        raise ConfigError(f"commodity {cid!r} not present in the commodity spec")
    frame = _read_strict(path, PRICE_COLUMNS)

    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    _first_bad(dates.isna(), path, "malformed date")
    expiry = pd.to_datetime(frame["expiry_date"], format="%Y-%m-%d", errors="coerce")
    _first_bad(expiry.isna(), path, "malformed expiry_date")
    _first_bad(frame["contract_code"].str.strip() == "", path, "empty contract_code")
    numeric = {}
    for col in ("settle", "volume", "open_interest"):
        numeric[col] = pd.to_numeric(frame[col], errors="coerce")
        _first_bad(numeric[col].isna() | ~np.isfinite(numeric[col]), path, f"malformed {col}")
    _first_bad(numeric["settle"] <= 0, path, "settle must be positive")
    _first_bad(numeric["volume"] < 0, path, "volume must be non-negative")
    _first_bad(numeric["open_interest"] < 0, path, "open_interest must be non-negative")
    _first_bad(dates > expiry, path, "row dated after contract expiry")

    dup = pd.DataFrame({"d": dates, "c": frame["contract_code"]}).duplicated(keep="first")
    if dup.any():
        line = int(np.flatnonzero(dup.values)[0]) + 2
        raise DuplicateError("duplicate (date, contract_code) row", line=line, path=path)

    contracts = []
    codes = frame["contract_code"].values
    for code in pd.unique(codes):
        rows = np.flatnonzero(codes == code)
        exp = expiry.values[rows]
        if np.any(exp != exp[0]):
            raise ParseError(f"contract {code} has inconsistent expiry_date", line=int(rows[np.argmax(exp != exp[0])]) + 2, path=path)
        d = dates.values[rows]
        back = np.flatnonzero(d[1:] <= d[:-1])
        if back.size:
            raise ParseError(f"dates out of order for contract {code}", line=int(rows[back[0] + 1]) + 2, path=path)
        contracts.append(
            ContractSeries(
                commodity_id=cid,
                contract_code=str(code),
                expiry_date=exp[0],
                dates=d,
                settle=numeric["settle"].values[rows],
                volume=numeric["volume"].values[rows],
                open_interest=numeric["open_interest"].values[rows],
            )
        )
    entry = spec[cid]
    return ContractChain(cid, entry["sector"], tuple(contracts), entry["multiplier"], entry["tick_size"])


def chain_to_frame(chain: ContractChain) -> pd.DataFrame:
    """Rows of ``chain`` in the price-CSV layout, sorted by date then expiry."""
    tab = chain.long_table()
    codes = np.array(chain.codes, dtype=object)
    expiries = chain.expiries
    frame = pd.DataFrame(
        {
            "date": pd.DatetimeIndex(tab["date"]).strftime("%Y-%m-%d"),
            "contract_code": codes[tab["contract"]] if len(codes) else [],
            "expiry_date": pd.DatetimeIndex(expiries[tab["contract"]]).strftime("%Y-%m-%d") if len(codes) else [],
            "settle": tab["settle"],
            "volume": tab["volume"].astype(np.int64),
            "open_interest": tab["open_interest"].astype(np.int64),
        }
    )
    order = np.lexsort((tab["contract"], tab["date"]))
    return frame.iloc[order].reset_index(drop=True)


def write_chain(chain: ContractChain, path) -> None:
    chain_to_frame(chain).to_csv(path, index=False, float_format="%.10g")


def load_cot(path) -> dict:
    """Read a multi-commodity CoT CSV into ``{commodity_id: CotSeries}``."""
    path = Path(path)
    frame = _read_strict(path, COT_COLUMNS)
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    _first_bad(dates.isna(), path, "malformed date")
    short = pd.to_numeric(frame["commercial_short"], errors="coerce")
    long_ = pd.to_numeric(frame["commercial_long"], errors="coerce")
    _first_bad(short.isna() | long_.isna(), path, "malformed position count")
    _first_bad((short < 0) | (long_ < 0), path, "position counts must be non-negative")
    dup = pd.DataFrame({"d": dates, "c": frame["commodity_id"]}).duplicated()
    if dup.any():
        raise DuplicateError("duplicate (date, commodity_id) row", line=int(np.flatnonzero(dup.values)[0]) + 2, path=path)
    out = {}
    for cid in sorted(pd.unique(frame["commodity_id"])):
        rows = np.flatnonzero(frame["commodity_id"].values == cid)
        d = dates.values[rows]
        back = np.flatnonzero(d[1:] <= d[:-1])
        if back.size:
            raise ParseError(f"dates out of order for {cid}", line=int(rows[back[0] + 1]) + 2, path=path)
        out[cid] = CotSeries(cid, d, short.values[rows], long_.values[rows])
    return out


def write_cot(cot: Mapping, path) -> None:
    frames = []
    for cid in sorted(cot):
        s = cot[cid]
        frames.append(
            pd.DataFrame(
                {
                    "date": pd.DatetimeIndex(s.dates).strftime("%Y-%m-%d"),
                    "commodity_id": cid,
                    "commercial_short": s.commercial_short.astype(np.int64),
                    "commercial_long": s.commercial_long.astype(np.int64),
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=COT_COLUMNS)
    frame.to_csv(path, index=False)


def load_market(prices_dir, spec, cot_path=None, commodities=None):
    """Load every ``<commodity>.csv`` in ``prices_dir`` listed in ``spec``."""
    spec = load_commodity_spec(spec)
    prices_dir = Path(prices_dir)
    wanted = sorted(commodities) if commodities else sorted(spec)
    chains = {}
    for cid in wanted:
        if cid not in spec:
            raise ConfigError(f"commodity {cid!r} not present in the commodity spec")
        f = prices_dir / f"{cid}.csv"
        if not f.exists():
            raise ConfigError(f"no price file for {cid!r} in {prices_dir}")
        chains[cid] = load_chain(f, spec, cid)
    cot = load_cot(cot_path) if cot_path else {}
    return chains, cot
