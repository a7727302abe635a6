"""The training loop: batch, losses, weighted update, retraction, weight update, trace row."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DomainError, LossDomainError
from ..kd_losses import GROUPINGS
from ..numerics import make_rng, norm
from ..weight_controller import ControllerConfig, WeightController, rates
from .diagnostics import conflict_score, dominance_score
from .workloads import DistillWorkload, QuadraticWorkload, Workload

TASKS = ("two_quadratic", "blobs_kd", "toy_detection")
FEATURE_LOSSES = ("similarity", "normalized_l1")


@dataclass
class SubspaceConfig:
    enabled: bool = True
    n: int | None = None


@dataclass
class TrainConfig:
    task: str = "two_quadratic"
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    eta_theta: float = 1e-2
    steps: int = 1000
    seed: int = 0
    subspace: SubspaceConfig = field(default_factory=SubspaceConfig)
    temperature: float = 1.0
    grouping: str = "two_task"
    trace_path: str | None = None
    diagnostics: bool = True
    # two_quadratic
    dim: int = 10
    conflict: bool = False
    init_scale: float = 1.0
    pareto_samples: int = 2001
    # blobs_kd / toy_detection
    num_samples: int = 4096
    input_dim: int = 32
    num_classes: int = 8
    teacher_width: int = 128
    student_width: int = 32
    teacher_steps: int = 1500
    teacher_lr: float = 0.05
    batch_size: int = 64
    feature_loss: str = "similarity"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if not self.eta_theta > 0:
            raise ValueError(f"eta_theta must be positive, got {self.eta_theta}")
        if not (isinstance(self.steps, int) and self.steps >= 1):
            raise ValueError(f"steps must be an integer >= 1, got {self.steps!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.grouping not in GROUPINGS:
            raise ValueError(f"grouping must be one of {GROUPINGS}, got {self.grouping!r}")
        if self.feature_loss not in FEATURE_LOSSES:
            raise ValueError(f"feature_loss must be one of {FEATURE_LOSSES}, got {self.feature_loss!r}")
        for name in ("dim", "pareto_samples", "num_samples", "input_dim", "num_classes",
                     "teacher_width", "student_width", "batch_size"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.teacher_steps < 0 or not self.teacher_lr > 0:
            raise ValueError("teacher_steps must be >= 0 and teacher_lr positive")
        if self.task == "two_quadratic" and self.grouping != "two_task":
            raise ValueError("two_quadratic has exactly two objectives; use grouping 'two_task'")
        if self.controller.mode == "fixed" and self.grouping != "two_task":
            raise ValueError("fixed mode supports only the two-task grouping")
        sub = self.subspace
        if sub.n is not None and sub.n < max(self.teacher_width, self.student_width):
            raise ValueError("subspace.n must be >= max(teacher_width, student_width)")


@dataclass
class TraceRow:
    iter: int
    losses: tuple
    pi: tuple
    conflict: float | None
    dominance_log10: float | None
    gstar_norm: float
    pareto_dist: float | None
    backward_count: int
    # in-memory extras, not written to the CSV trace
    alignment: tuple | None = None
    alignment_scale: float | None = None
    rates: tuple | None = None


def build_workload(cfg: TrainConfig) -> Workload:
    if cfg.task == "two_quadratic":
        return QuadraticWorkload.seeded(
            cfg.seed, dim=cfg.dim, conflict=cfg.conflict, init_scale=cfg.init_scale,
            pareto_samples=cfg.pareto_samples,
        )
    return DistillWorkload.seeded(
        cfg.seed,
        task=cfg.task,
        num_samples=cfg.num_samples,
        input_dim=cfg.input_dim,
        num_classes=cfg.num_classes,
        teacher_width=cfg.teacher_width,
        student_width=cfg.student_width,
        teacher_steps=cfg.teacher_steps,
        teacher_lr=cfg.teacher_lr,
        subspace_n=cfg.subspace.n,
        temperature=cfg.temperature,
        grouping=cfg.grouping,
        train_subspace=cfg.subspace.enabled,
        feature_loss=cfg.feature_loss,
        batch_size=cfg.batch_size,
    )


class Trainer:
    """Owns one run's mutable state; call :meth:`step` sequentially."""

    def __init__(self, cfg: TrainConfig, workload: Workload | None = None):
        self.cfg = cfg
        self.workload = workload or build_workload(cfg)
        self.controller = WeightController(cfg.controller, k=self.workload.k)
        self.theta = self.workload.initial_theta()
        self.rng = make_rng(cfg.seed, 2)
        self.t = 0

    def _check(self, losses, where: str):
        for name, v in zip(self.workload.task_names, losses):
            if not v > 0:
                raise LossDomainError(f"{name} ({where})", float(v), step=self.t)

    def _diagnose(self, raw_grads):
        """Conflict/dominance on the raw distill/task gradients (extra tasks fold into distill)."""
        g_dist = raw_grads[:-1].sum(axis=0)
        g_task = raw_grads[-1]
        try:
            dom = dominance_score(g_dist, g_task)
        except DomainError:
            dom = None
        return conflict_score(g_dist, g_task), dom

    def step(self) -> TraceRow:
        wl, ctl, mode = self.workload, self.controller, self.cfg.controller.mode
        batch = wl.sample_batch(self.rng)
        theta = self.theta
        raw = None
        step_rates = None

        if mode == "amortized":
            pi = ctl.pi
            losses, update = wl.combined_log_gradient(theta, batch, pi)
            self._check(losses, "before step")
            if self.cfg.diagnostics:
                _, raw = wl.probe_task_gradients(theta, batch)
        else:
            losses, raw = wl.task_gradients(theta, batch)
            self._check(losses, "before step")
            if mode == "exact":
                pi, update = ctl.step_exact(raw, losses)
            else:
                update = ctl.step_fixed(raw)
                pi = ctl.pi

        new_theta = wl.retract(theta - self.cfg.eta_theta * update)

        if mode == "amortized":
            after = wl.losses(new_theta, batch)
            self._check(after, "after step")
            step_rates = tuple(float(r) for r in rates(losses, after))
            ctl.step_amortized(ctl.amortized_signal(losses, after))

        conflict = dom = align = scale = None
        if raw is not None:
            conflict, dom = self._diagnose(raw)
            log_grads = raw / losses[:, None]
            align = tuple(float(update @ g) for g in log_grads)
            scale = float(max(g @ g for g in log_grads))

        self.theta = new_theta
        self.t += 1
        return TraceRow(
            iter=self.t,
            losses=tuple(float(v) for v in losses),
            pi=tuple(float(p) for p in pi),
            conflict=conflict,
            dominance_log10=dom,
            gstar_norm=norm(update),
            pareto_dist=wl.pareto_distance(new_theta),
            backward_count=wl.counter.backward,
            alignment=align,
            alignment_scale=scale,
            rates=step_rates,
        )


@dataclass
class RunResult:
    rows: list
    summary: dict
    theta: np.ndarray


def trace_header(task_names) -> list[str]:
    if tuple(task_names) == ("distill", "task"):
        loss_cols = ["loss_distill", "loss_task"]
        pi_cols = ["pi_distill", "pi_task"]
    else:
        loss_cols = [f"loss_{n}" for n in task_names]
        pi_cols = [f"pi_{n}" for n in task_names]
    return ["iter", *loss_cols, *pi_cols, "conflict", "dominance_log10", "gstar_norm", "pareto_dist", "backward_count"]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def render_trace(rows, task_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(task_names))
    for r in rows:
        w.writerow([
            r.iter,
            *map(format_value, r.losses),
            *map(format_value, r.pi),
            format_value(r.conflict),
            format_value(r.dominance_log10),
            format_value(r.gstar_norm),
            format_value(r.pareto_dist),
            r.backward_count,
        ])
    return buf.getvalue()


def write_trace(path, rows, task_names) -> None:
    Path(path).write_text(render_trace(rows, task_names), encoding="utf-8")


def run(cfg: TrainConfig, workload: Workload | None = None, trace_path=None) -> RunResult:
    """Execute ``cfg.steps`` iterations, write the trace if a path is given, return rows and a summary."""
    trainer = Trainer(cfg, workload)
    rows = [trainer.step() for _ in range(cfg.steps)]
    wl = trainer.workload
    path = trace_path if trace_path is not None else cfg.trace_path
    if path:
        write_trace(path, rows, wl.task_names)

    if isinstance(wl, DistillWorkload):
        final_batch = wl.ds.train_idx
    else:
        final_batch = None
    final_losses = wl.probe_losses(trainer.theta, final_batch)
    dists = [r.pareto_dist for r in rows if r.pareto_dist is not None]
    summary = {
        "task": cfg.task,
        "mode": cfg.controller.mode,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "task_names": list(wl.task_names),
        "final_losses": [float(v) for v in final_losses],
        "final_pi": [float(p) for p in trainer.controller.pi],
        "final_pareto_distance": dists[-1] if dists else None,
        "min_pareto_distance": min(dists) if dists else None,
        "backward_count": wl.counter.backward,
        "per_task_gradient_evals": wl.counter.per_task,
        "combined_gradient_evals": wl.counter.combined,
        "loss_only_evals": wl.counter.loss_only,
        "trace_path": str(path) if path else None,
    }
    summary.update(wl.summary(trainer.theta))
    return RunResult(rows=rows, summary=summary, theta=trainer.theta)
