import subprocess
import sys

import numpy as np
import pandas as pd
import pytest
import yaml

from nsfutures.cli import RunConfig, main
from nsfutures.errors import ConfigError

SUBSET = ["corn", "wheat", "gold", "silver", "crude_oil", "coffee"]


def write_yaml(path, obj):
    path.write_text(yaml.safe_dump(obj))
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    idx = pd.bdate_range("1990-01-01", periods=700)
    pd.DataFrame({"date": idx.strftime("%Y-%m-%d")[::21], "value": np.sin(np.arange(len(idx[::21])))}).to_csv(
        root / "ind.csv", index=False)
    pd.DataFrame({"date": idx.strftime("%Y-%m-%d"), "value": 0.0001}).to_csv(root / "rf.csv", index=False)
    cfg = write_yaml(root / "run.yaml", {
        "seed": 5,
        "data": {"simulate": {"n_days": 400, "subset": SUBSET}},
        "strategies": ["L", "S", "C"],
        "blends": [["S", "C"]],
        "timing": {"windows": [5, 22]},
        "indicator": "ind.csv",
        "risk_free": "rf.csv",
        "output": "out",
    })
    assert main(["run", "--config", str(cfg)]) == 0
    return root / "out"


def test_run_writes_results_and_report(finished_run):
    res = finished_run / "results"
    names = sorted(p.name for p in res.glob("*.csv"))
    for label in ("L", "S", "C", "LAVG", "SAVG", "CAVG", "S_TIMED_d5", "S_TIMED_d22", "BLEND_S_C"):
        assert f"{label}.csv" in names
    rep = finished_run / "report"
    for f in ("summary.csv", "turnover_tc.csv", "spanning.csv", "weekday.csv", "subsample.csv",
              "timing.csv", "wealth.csv", "conditional.csv", "leverage.csv"):
        assert (rep / f).exists(), f
    summary = pd.read_csv(rep / "summary.csv")
    for label in ("L", "S", "C"):
        assert ((summary["strategy"] == label) & (summary["series"] == "net_tc3")).any()
    span = pd.read_csv(rep / "spanning.csv")
    assert list(span["strategy"]) == ["L", "S", "C"]
    assert {"beta_LAVG", "beta_SAVG", "beta_CAVG", "t_alpha"} <= set(span.columns)


def test_report_regenerates_identically(finished_run, tmp_path):
    before = {p.name: p.read_bytes() for p in (finished_run / "report").glob("*.csv")}
    assert main(["report", str(finished_run / "results"), "--out", str(tmp_path)]) == 0
    after = {p.name: p.read_bytes() for p in (tmp_path / "report").glob("*.csv")}
    assert before == after


def test_exit_codes(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == 2
    assert "error in cli" in capsys.readouterr().err
    bad = write_yaml(tmp_path / "bad.yaml", {"data": {"simulate": {}}, "strategies": []})
    assert main(["run", "--config", str(bad)]) == 1
    unknown = write_yaml(tmp_path / "u.yaml", {"data": {"simulate": {}}, "strategies": ["S"], "colour": 1})
    assert main(["run", "--config", str(unknown)]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    assert main(["fit"]) == 1


def test_simulate_then_fit_from_files(tmp_path):
    sim = write_yaml(tmp_path / "sim.yaml", {"n_days": 120, "subset": ["corn", "gold"]})
    assert main(["simulate", "--config", str(sim), "--seed", "3", "--out", str(tmp_path / "mkt")]) == 0
    for f in ("commodities.yaml", "cot.csv", "truth.csv"):
        assert (tmp_path / "mkt" / f).exists()
    cfg = write_yaml(tmp_path / "fit.yaml", {
        "data": {"prices_dir": "mkt/prices", "spec": "mkt/commodities.yaml"},
        "strategies": ["S"],
    })
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "fits")]) == 0
    fits = pd.read_csv(tmp_path / "fits" / "fits.csv")
    assert set(fits["commodity"]) == {"corn", "gold"}
    assert (tmp_path / "fits" / "fit_gaps.csv").exists()


def test_run_config_parsing():
    cfg = RunConfig.from_dict({
        "data": {"simulate": {}},
        "strategies": ["S", {"family": "S", "mode": "ts"}, {"family": "L", "signal": "RY6"}],
        "costs": {"commission": 2.0, "two_ticket": True},
    })
    assert [s.label for s in cfg.specs()] == ["S", "S_TS", "RY6"]
    assert [m.commission for m in cfg.cost_models()] == [2.0, 2.0, 2.0]
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"data": {"simulate": {}}, "strategies": ["S", "S"]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"data": {"prices_dir": "x"}, "strategies": ["S"]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"data": {"simulate": {}}, "strategies": ["S"], "fit": {"depth": 5}})


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nsfutures.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "simulate" in out.stdout and "report" in out.stdout
