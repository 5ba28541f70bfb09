"""Nelson-Siegel term-structure signals and backtests for commodity futures."""

from . import backtest, marketdata, nscurve, perfstats, portfolio, signals
from .backtest import BacktestResult, CostModel, Pipeline, run
from .errors import ConfigError, DataError, DomainError, FitError, NSFuturesError
from .nscurve import decay_factor, fit_ns, fit_ns_seasonal, fit_panel
from .perfstats import nw_regression, summarize
from .portfolio import StrategySpec, WeightBook

__version__ = "0.1.0"

__all__ = [
    "BacktestResult", "ConfigError", "CostModel", "DataError", "DomainError", "FitError", "NSFuturesError",
    "Pipeline", "StrategySpec", "WeightBook", "backtest", "decay_factor", "fit_ns", "fit_ns_seasonal",
    "fit_panel", "marketdata", "nscurve", "nw_regression", "perfstats", "portfolio", "run", "signals", "summarize",
]
