"""Sweep of synthetic gradient pairs over conflict angle and norm ratio."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..moo_solver import BaselineWeights, combine_fixed, gram2, solve_closed_form
from ..trainer.diagnostics import conflict_score, dominance_score
from ..trainer.loop import format_value

BENCH_COLUMNS = [
    "angle", "ratio", "conflict", "dominance_log10", "pi_distill", "pi_task",
    "gstar_norm", "fixed_opposes", "mokd_opposes",
]
OPPOSE_RTOL = 1e-12


def bench_cell(angle: float, ratio: float, alpha: BaselineWeights | None = None) -> dict:
    """``g_task = (1, 0)`` and ``g_dist = ratio * (cos angle, sin angle)``."""
    alpha = alpha or BaselineWeights()
    g_task = np.array([1.0, 0.0])
    g_dist = ratio * np.array([math.cos(angle), math.sin(angle)])
    pi = solve_closed_form(gram2(g_dist, g_task))
    gstar = pi[0] * g_dist + pi[1] * g_task
    g_tot = combine_fixed(g_dist, g_task, alpha)
    scale = max(g_dist @ g_dist, 1.0)
    return {
        "angle": angle,
        "ratio": ratio,
        "conflict": conflict_score(g_dist, g_task),
        "dominance_log10": dominance_score(g_dist, g_task),
        "pi_distill": float(pi[0]),
        "pi_task": float(pi[1]),
        "gstar_norm": float(np.linalg.norm(gstar)),
        "fixed_opposes": bool(g_tot @ g_dist < 0 or g_tot @ g_task < 0),
        "mokd_opposes": bool(min(gstar @ g_dist, gstar @ g_task) < -OPPOSE_RTOL * scale),
    }


def bench_grid(angle_steps: int, ratio_steps: int) -> list[dict]:
    if angle_steps < 2 or ratio_steps < 2:
        raise ValueError("angle and ratio step counts must both be >= 2")
    angles = np.linspace(0.0, math.pi, angle_steps)
    ratios = np.logspace(-3.0, 3.0, ratio_steps)
    return [bench_cell(float(a), float(r)) for a in angles for r in ratios]


def render_bench(rows) -> str:
    lines = [",".join(BENCH_COLUMNS)]
    for row in rows:
        lines.append(",".join(
            str(int(row[c])) if isinstance(row[c], bool) else format_value(row[c]) for c in BENCH_COLUMNS
        ))
    return "\n".join(lines) + "\n"


def write_bench(path, rows) -> None:
    Path(path).write_text(render_bench(rows), encoding="utf-8")


def read_bench(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
