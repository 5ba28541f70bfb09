"""Command-line entry point: ``nsfutures {simulate,fit,run,report}``.

Every command reads one YAML run configuration (see README for the keys);
``--seed``, ``--threads`` and ``--out`` override the matching keys. Exit codes:
0 success, 1 invalid configuration, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .backtest import SUBSAMPLE_CUTS, BacktestResult, CostModel, Pipeline, select_universe, subsample_masks
from .errors import ConfigError, DataError, NSFuturesError
from .marketdata import load_market, simulate_market, write_market
from .marketdata.simulate import SimulationConfig
from .nscurve import fit_panel
from .perfstats import conditional_perf, nw_regression, spanning, summarize, wealth_curve, weekday_perf
from .portfolio import TIMING_WINDOWS, StrategySpec, blend, dispersion_series, timing_overlay

log = logging.getLogger("nsfutures")

_STRATEGY_KEYS = {"family", "mode", "geometry", "far", "name", "signal", "depth", "smooth", "seasonal"}
_TOP_KEYS = {"seed", "threads", "output", "data", "universe", "strategies", "benchmarks", "costs",
             "timing", "subsample_cuts", "blends", "spanning", "indicator", "risk_free", "fit"}
DEFAULT_BENCHMARKS = ("LAVG", "SAVG", "CAVG")


@dataclass
class RunConfig:
    """Declarative description of a run; see README for the YAML layout."""

    data: dict
    strategies: list
    seed: int = 0
    threads: int = 1
    output: str = "out"
    universe: dict = field(default_factory=dict)
    benchmarks: list = field(default_factory=lambda: list(DEFAULT_BENCHMARKS))
    costs: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    subsample_cuts: list = field(default_factory=lambda: list(SUBSAMPLE_CUTS))
    blends: list = field(default_factory=list)
    spanning: dict = field(default_factory=dict)
    indicator: str | None = None
    risk_free: str | None = None
    fit: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "RunConfig":
        raw = dict(raw or {})
        unknown = sorted(set(raw) - _TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "data" not in raw:
            raise ConfigError("config needs a 'data' section (simulate or prices_dir/spec)")
        cfg = cls(**{k: v for k, v in raw.items() if v is not None or k in ("indicator", "risk_free")},
                  base_dir=Path(base_dir))
        cfg.strategies = cfg.strategies if "strategies" in raw else []
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict(raw, path.parent)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def specs(self) -> list:
        out = []
        for entry in self.strategies:
            entry = {"family": entry} if isinstance(entry, str) else dict(entry)
            bad = sorted(set(entry) - _STRATEGY_KEYS)
            if bad:
                raise ConfigError(f"unknown strategy keys: {', '.join(bad)}")
            out.append(StrategySpec(**entry))
        labels = [s.label for s in out]
        if len(set(labels)) != len(labels):
            raise ConfigError("strategy labels must be unique; set 'name' to disambiguate")
        return out

    def benchmark_specs(self) -> list:
        return [StrategySpec(b) if isinstance(b, str) else StrategySpec(**b) for b in self.benchmarks]

    def cost_models(self) -> list:
        c = dict(self.costs)
        c.pop("two_ticket", None)
        known = {"commission", "flat_rate", "n_ticks"}
        if set(c) - known:
            raise ConfigError(f"unknown cost keys: {', '.join(sorted(set(c) - known))}")
        return [CostModel(s, **c) for s in ("TC1", "TC2", "TC3")]

    def validate(self):
        if not self.strategies:
            raise ConfigError("strategy list is empty")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        data = self.data
        if not isinstance(data, dict) or not ("simulate" in data or "prices_dir" in data):
            raise ConfigError("data section needs 'simulate' or 'prices_dir' + 'spec'")
        if "prices_dir" in data and "spec" not in data:
            raise ConfigError("data.prices_dir needs data.spec")
        self.specs()
        self.benchmark_specs()
        self.cost_models()
        windows = self.timing.get("windows", list(TIMING_WINDOWS))
        if any(int(d) < 1 for d in windows):
            raise ConfigError("timing windows must be positive")
        depth = int(self.fit.get("depth", 4))
        if depth not in (4, 6, 12):
            raise ConfigError("fit.depth must be 4, 6 or 12")
        for pair in self.blends:
            if len(pair) != 2:
                raise ConfigError("each blend lists exactly two strategy labels")
        freq = self.spanning.get("frequency", "monthly")
        if freq not in ("daily", "monthly"):
            raise ConfigError("spanning.frequency must be daily or monthly")


def _load_data(cfg: RunConfig):
    data = cfg.data
    if "simulate" in data:
        sim = SimulationConfig.from_dict(data["simulate"])
        market = simulate_market(sim, cfg.seed)
        chains, cot = market.chains, market.cot
    else:
        chains, cot = load_market(cfg.resolve(data["prices_dir"]), cfg.resolve(data["spec"]),
                                  cfg.resolve(data["cot"]) if data.get("cot") else None)
    uni = cfg.universe or {}
    chains = select_universe(chains, uni.get("sectors"), uni.get("commodities"))
    return chains, {c: s for c, s in cot.items() if c in chains}


def _read_dated(path) -> pd.Series:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns[:2]) != ["date", "value"]:
        raise DataError("series file needs columns date,value", path=path)
    return pd.Series(frame["value"].to_numpy(float), index=pd.to_datetime(frame["date"]), name=Path(path).stem)


def _write_csv(frame: pd.DataFrame, path, index=True):
    frame.to_csv(path, index=index, float_format="%.10g", date_format="%Y-%m-%d")


# -- commands --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.config:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
    else:
        raw = {}
    if "data" in raw:  # a full run config
        raw = (raw.get("data") or {}).get("simulate")
        if raw is None:
            raise ConfigError("config has no data.simulate section")
    seed = args.seed if args.seed is not None else 0
    sim = SimulationConfig.from_dict(raw)
    out = Path(args.out or "sim")
    write_market(simulate_market(sim, seed), out)
    log.info("wrote simulated market to %s", out)
    return 0


def _config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.output = args.out
    elif not Path(cfg.output).is_absolute():
        cfg.output = str(cfg.resolve(cfg.output))
    cfg.validate()
    return cfg


def cmd_fit(args) -> int:
    cfg = _config(args)
    chains, _ = _load_data(cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    fp = fit_panel(chains, depth=int(cfg.fit.get("depth", 4)), seasonal=cfg.fit.get("seasonal"), threads=cfg.threads)
    fp.to_csv(out / "fits.csv")
    gaps = fp.gaps.copy()
    gaps["date"] = pd.DatetimeIndex(gaps["date"]).strftime("%Y-%m-%d")
    gaps.to_csv(out / "fit_gaps.csv", index=False)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    chains, cot = _load_data(cfg)
    out = Path(cfg.output)
    res_dir = out / "results"
    res_dir.mkdir(parents=True, exist_ok=True)
    for old in res_dir.glob("*.csv"):
        old.unlink()
    pipe = Pipeline(chains, cot, cfg.threads)
    costs = cfg.cost_models()
    two_ticket = bool(cfg.costs.get("two_ticket", False))
    manifest = {"strategies": [], "benchmarks": [], "timed": [], "blends": []}
    results = {}

    def keep(res: BacktestResult, role: str):
        results[res.label] = res
        res.to_csv(res_dir / f"{res.label}.csv")
        manifest[role].append(res.label)

    for spec in cfg.specs():
        keep(pipe.run(spec, costs, two_ticket=two_ticket), "strategies")
    for spec in cfg.benchmark_specs():
        if spec.label in results:
            continue
        keep(pipe.run(spec, costs, two_ticket=two_ticket), "benchmarks")

    # dispersion timing of the slope strategy
    base = cfg.timing.get("base", "S")
    leverage = {}
    if base in results and cfg.timing.get("enabled", True):
        depth = next((s.depth for s in cfg.specs() if s.label == base), 4)
        disp = dispersion_series(pipe.fits(depth))
        disp.to_frame("dispersion").rename_axis("date").to_csv(res_dir / "dispersion.csv", float_format="%.12g", date_format="%Y-%m-%d")
        manifest["dispersion"] = "dispersion.csv"
        src = results[base]
        for d in cfg.timing.get("windows", list(TIMING_WINDOWS)):
            tim = timing_overlay(src.gross, disp, int(d), bool(cfg.timing.get("expanding", False)))
            lev = tim.leverage
            idx = lev.index
            timed = BacktestResult(
                f"{base}_TIMED_d{d}",
                tim.returns,
                (src.turnover.reindex(idx) * lev),
                {k: v.reindex(idx) * lev for k, v in src.net.items()},
                src.flags.reindex(idx).fillna(False).astype(bool),
            )
            keep(timed, "timed")
            leverage[f"d{d}"] = lev
    if leverage:
        _write_csv(pd.DataFrame(leverage).rename_axis("date"), res_dir / "leverage.csv")
    for a, b in cfg.blends:
        if a not in results or b not in results:
            raise ConfigError(f"blend refers to unknown strategy {a if a not in results else b!r}")
        ra, rb = results[a], results[b]
        net = {k: blend(ra.net[k], rb.net[k]) for k in ra.net}
        g = blend(ra.gross, rb.gross)
        to = (0.5 * ra.turnover + 0.5 * rb.turnover).reindex(g.index)
        flags = (ra.flags.reindex(g.index).fillna(False).astype(bool) | rb.flags.reindex(g.index).fillna(False).astype(bool))
        keep(BacktestResult(f"BLEND_{a}_{b}", g, to, net, flags), "blends")

    manifest["subsample_cuts"] = [str(c) for c in cfg.subsample_cuts]
    manifest["spanning"] = {"frequency": cfg.spanning.get("frequency", "monthly"),
                            "returns": cfg.spanning.get("returns", "net_tc1")}
    if cfg.indicator:
        ind = _read_dated(cfg.resolve(cfg.indicator))
        ind.rename_axis("date").rename("value").to_csv(res_dir / "indicator.csv", date_format="%Y-%m-%d")
        manifest["indicator"] = "indicator.csv"
    if cfg.risk_free:
        rf = _read_dated(cfg.resolve(cfg.risk_free))
        rf.rename_axis("date").rename("value").to_csv(res_dir / "risk_free.csv", date_format="%Y-%m-%d")
        manifest["risk_free"] = "risk_free.csv"
    with open(res_dir / "manifest.yaml", "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    write_report(res_dir, out / "report")
    return 0


def cmd_report(args) -> int:
    res_dir = Path(args.results) if args.results else Path(args.out or "out") / "results"
    out = Path(args.out) / "report" if args.out else res_dir.parent / "report"
    write_report(res_dir, out)
    return 0


# -- report ----------------------------------------------------------------------


def _load_results(res_dir: Path):
    man_path = res_dir / "manifest.yaml"
    if not res_dir.is_dir() or not man_path.exists():
        raise DataError(f"no results in {res_dir}")
    with open(man_path) as fh:
        manifest = yaml.safe_load(fh) or {}
    results = {}
    for role in ("strategies", "benchmarks", "timed", "blends"):
        for label in manifest.get(role, []):
            f = res_dir / f"{label}.csv"
            if not f.exists():
                raise DataError(f"missing result file {f}")
            results[label] = BacktestResult.from_csv(f, label)
    if not results:
        raise DataError(f"no results in {res_dir}")
    return manifest, results


def _fmt(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.rename_axis(frame.index.name or "name")


def write_report(res_dir, out_dir) -> None:
    """Regenerate every report table from persisted results."""
    res_dir, out_dir = Path(res_dir), Path(out_dir)
    manifest, results = _load_results(res_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series_col = manifest.get("spanning", {}).get("returns", "net_tc1")

    rows = {}
    for label, res in results.items():
        rows[(label, "gross")] = summarize(res.gross).to_dict()
        for k in ("tc1", "tc2", "tc3"):
            rows[(label, f"net_{k}")] = summarize(res.net[k]).to_dict()
    summary = pd.DataFrame(rows).T
    summary.index.names = ["strategy", "series"]
    _write_csv(summary, out_dir / "summary.csv")

    tc = {}
    for label, res in results.items():
        row = {"mean_turnover": float(res.turnover.mean()), "max_turnover": float(res.turnover.max()),
               "days_turnover_above_2": int((res.turnover > 2).sum())}
        row["gross_mean"] = 252 * float(res.gross.mean())
        for k in ("tc1", "tc2", "tc3"):
            s = summarize(res.net[k])
            row[f"net_{k}_mean"] = s.ann_mean_arithmetic
            row[f"net_{k}_t"] = s.t_mean
            row[f"net_{k}_sharpe"] = s.sharpe
        tc[label] = row
    _write_csv(_fmt(pd.DataFrame(tc).T.rename_axis("strategy")), out_dir / "turnover_tc.csv")

    def pick(res: BacktestResult) -> pd.Series:
        return res.gross if series_col == "gross" else res.net[series_col.replace("net_", "")]

    bench = [b for b in manifest.get("benchmarks", []) if b in results]
    freq = manifest.get("spanning", {}).get("frequency", "monthly")
    span_rows = []
    if bench:
        factors = pd.DataFrame({b: pick(results[b]) for b in bench})
        for label in manifest.get("strategies", []):
            rep = spanning(pick(results[label]), factors, frequency=freq)
            row = {"strategy": label, "alpha_annualized": rep.alpha_annualized, "t_alpha": float(rep.tvalues["const"]),
                   "adj_r2": rep.adj_r_squared, "nobs": rep.nobs}
            for b in bench:
                row[f"beta_{b}"] = float(rep.params[b])
                row[f"t_{b}"] = float(rep.tvalues[b])
            span_rows.append(row)
    pd.DataFrame(span_rows).to_csv(out_dir / "spanning.csv", index=False, float_format="%.10g")

    wk = []
    for label in manifest.get("strategies", []):
        w = weekday_perf(pick(results[label]))
        w.insert(0, "strategy", label)
        wk.append(w.rename_axis("weekday").reset_index())
    if wk:
        pd.concat(wk).to_csv(out_dir / "weekday.csv", index=False, float_format="%.10g")

    cuts = manifest.get("subsample_cuts", list(SUBSAMPLE_CUTS))
    sub = []
    for label in manifest.get("strategies", []):
        s = pick(results[label])
        for period, mask in subsample_masks(s.index, cuts).items():
            part = s[mask]
            if len(part) < 2:
                continue
            d = summarize(part).to_dict()
            sub.append({"strategy": label, "period": period, **d})
    pd.DataFrame(sub).to_csv(out_dir / "subsample.csv", index=False, float_format="%.10g")

    timed = manifest.get("timed", [])
    if timed:
        base_label = timed[0].split("_TIMED_")[0]
        trows = []
        base = pick(results[base_label]) if base_label in results else None
        for label in timed:
            s = pick(results[label])
            d = summarize(s).to_dict()
            row = {"strategy": label, **d}
            if base is not None:
                rep = nw_regression(s, base.rename("base"))
                row["alpha_vs_base"] = rep.alpha_annualized
                row["t_alpha_vs_base"] = float(rep.tvalues["const"])
            trows.append(row)
        pd.DataFrame(trows).to_csv(out_dir / "timing.csv", index=False, float_format="%.10g")
        lev = res_dir / "leverage.csv"
        if lev.exists():
            pd.read_csv(lev).to_csv(out_dir / "leverage.csv", index=False, float_format="%.10g")

    rf = _read_dated(res_dir / manifest["risk_free"]) if manifest.get("risk_free") else None
    wealth = pd.DataFrame({label: wealth_curve(pick(res), rf) for label, res in results.items()})
    wealth.index = pd.DatetimeIndex(wealth.index).strftime("%Y-%m-%d")
    _write_csv(wealth.rename_axis("date"), out_dir / "wealth.csv")

    if manifest.get("indicator"):
        ind = _read_dated(res_dir / manifest["indicator"])
        crow = []
        for label in manifest.get("strategies", []):
            c = conditional_perf(pick(results[label]), ind)
            crow.append({"strategy": label, "threshold": c.threshold, "n_high": c.n_high, "n_low": c.n_low,
                         "mean_high": c.high.ann_mean_arithmetic if c.high else np.nan,
                         "mean_low": c.low.ann_mean_arithmetic if c.low else np.nan,
                         "sharpe_high": c.high.sharpe if c.high else np.nan,
                         "sharpe_low": c.low.sharpe if c.low else np.nan,
                         "difference": c.difference, "t_difference": c.t_difference, "flagged": c.flagged})
        pd.DataFrame(crow).to_csv(out_dir / "conditional.csv", index=False, float_format="%.10g")


# -- entry point -------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsfutures", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("simulate", cmd_simulate, "write a synthetic market (prices, CoT, spec, ground truth)"),
        ("fit", cmd_fit, "fit the NS model to every commodity-day and export the panel"),
        ("run", cmd_run, "fit, build signals and books, backtest and report"),
        ("report", cmd_report, "rebuild report tables from a results directory"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int)
        if name == "report":
            sp.add_argument("results", nargs="?", help="results directory (default OUT/results)")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NSFuturesError as exc:
        frames = traceback.extract_tb(exc.__traceback__)
        where = Path(frames[-1].filename).stem if frames else "nsfutures"
        print(f"nsfutures {args.command}: error in {where}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
