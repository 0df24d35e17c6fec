"""Restarted Halpern PDHG for linear programming."""

from .lp_model import GeneralFormLP, SparseMatrix, StandardFormLP, to_standard_form
from .pdhg_core import Iterate, canonical_norm, fixed_point_residual, kkt_error, pdhg_step
from .solver import (AdaptiveResidualDecay, FixedFrequency, NoRestart, SolveResult, SolverConfig,
                     Status, solve, solve_baseline)

__all__ = [
    "AdaptiveResidualDecay", "FixedFrequency", "GeneralFormLP", "Iterate", "NoRestart",
    "SolveResult", "SolverConfig", "SparseMatrix", "StandardFormLP", "Status", "canonical_norm",
    "fixed_point_residual", "kkt_error", "pdhg_step", "solve", "solve_baseline", "to_standard_form",
]
