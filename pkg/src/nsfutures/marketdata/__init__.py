"""Futures chains, roll schedules, CoT data and the synthetic market generator."""

from .io import (
    COT_COLUMNS,
    PRICE_COLUMNS,
    chain_to_frame,
    load_chain,
    load_commodity_spec,
    load_cot,
    load_market,
    write_chain,
    write_commodity_spec,
    write_cot,
)
from .roll import (
    CurvePanel,
    RollSchedule,
    curve_panel,
    open_interest_profile,
    open_interest_table,
    roll_cutoffs,
    roll_schedule,
    snapshot,
)
from .simulate import (
    CommoditySim,
    SimulatedMarket,
    SimulationConfig,
    default_config,
    default_universe,
    simulate_market,
    write_market,
)
from .types import (
    DAYS_PER_MONTH,
    SECTORS,
    ContractChain,
    ContractSeries,
    CotSeries,
    CurvePoint,
    CurveSnapshot,
    excess_return,
)

__all__ = [
    "COT_COLUMNS",
    "CommoditySim",
    "ContractChain",
    "ContractSeries",
    "CotSeries",
    "CurvePanel",
    "CurvePoint",
    "CurveSnapshot",
    "DAYS_PER_MONTH",
    "PRICE_COLUMNS",
    "RollSchedule",
    "SECTORS",
    "SimulatedMarket",
    "SimulationConfig",
    "chain_to_frame",
    "curve_panel",
    "default_config",
    "default_universe",
    "excess_return",
    "load_chain",
    "load_commodity_spec",
    "load_cot",
    "load_market",
    "open_interest_profile",
    "open_interest_table",
    "roll_cutoffs",
    "roll_schedule",
    "simulate_market",
    "snapshot",
    "write_chain",
    "write_commodity_spec",
    "write_cot",
    "write_market",
]
