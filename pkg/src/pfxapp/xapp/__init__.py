from .ccdf import JointCcdf, estimate_ccdf
from .evaluate import SuccessReport, evaluate_success, success_rate
from .levelset import LevelSet, extract_level_set, uniform_grid
from .sweep import BetaGrid, SweepDataset, SweepError, run_sweep, simulate_windows
from .table import (InfeasibleRequirement, PolicyTable, QueryResult, StaleTableError,
                    build_policy_table, passes_equality_filter, passes_order_filter, select_betas)

__all__ = [
    "BetaGrid", "InfeasibleRequirement", "JointCcdf", "LevelSet", "PolicyTable", "QueryResult",
    "StaleTableError", "SuccessReport", "SweepDataset", "SweepError", "build_policy_table",
    "estimate_ccdf", "evaluate_success", "extract_level_set", "passes_equality_filter",
    "passes_order_filter", "run_sweep", "select_betas", "simulate_windows", "success_rate",
    "uniform_grid",
]
