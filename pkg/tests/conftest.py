from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from nsfutures.backtest import Pipeline
from nsfutures.marketdata import default_config, simulate_market

FIXTURES = Path(__file__).parent / "fixtures"

SMALL_UNIVERSE = ["corn", "wheat", "soybeans", "crude_oil", "gold", "silver", "live_hogs", "coffee"]


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def small_market():
    """A 600-day, 8-commodity simulated market shared across tests."""
    return simulate_market(default_config(600, commodities=SMALL_UNIVERSE), seed=11)


@pytest.fixture(scope="session")
def small_pipeline(small_market):
    return Pipeline(small_market.chains, small_market.cot)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def bdays(n, start="2020-01-01"):
    return pd.bdate_range(start, periods=n)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(k for k in results if isinstance(k, int)):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
