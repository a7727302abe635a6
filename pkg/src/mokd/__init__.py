"""Multi-objective gradient balancing for teacher-student distillation."""

from .errors import ConvergenceError, DegeneracyError, DimensionError, DomainError, LossDomainError, MokdError
from .moo_solver import (
    BaselineWeights,
    GramMatrix2,
    combine,
    combine_fixed,
    dual_objective,
    gram2,
    solve_closed_form,
    solve_closed_form_raw,
    solve_simplex_qp,
)
from .weight_controller import ControllerConfig, WeightController

__version__ = "0.1.0"

__all__ = [
    "BaselineWeights",
    "ControllerConfig",
    "ConvergenceError",
    "DegeneracyError",
    "DimensionError",
    "DomainError",
    "GramMatrix2",
    "LossDomainError",
    "MokdError",
    "WeightController",
    "combine",
    "combine_fixed",
    "dual_objective",
    "gram2",
    "solve_closed_form",
    "solve_closed_form_raw",
    "solve_simplex_qp",
]
