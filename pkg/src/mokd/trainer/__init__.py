"""Training loop, gradient-dynamics diagnostics and trace output."""

from .diagnostics import conflict_score, dominance_score, pareto_dominates
from .loop import RunResult, SubspaceConfig, TraceRow, TrainConfig, Trainer, render_trace, run, write_trace
from .workloads import DistillWorkload, GradientCounter, QuadraticWorkload, Workload

__all__ = [
    "DistillWorkload",
    "GradientCounter",
    "QuadraticWorkload",
    "RunResult",
    "SubspaceConfig",
    "TraceRow",
    "TrainConfig",
    "Trainer",
    "Workload",
    "conflict_score",
    "dominance_score",
    "pareto_dominates",
    "render_trace",
    "run",
    "write_trace",
]
