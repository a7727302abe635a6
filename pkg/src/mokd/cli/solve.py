"""One-shot weighting report for a pair of gradients."""

from __future__ import annotations

import numpy as np

from .. import moo_solver
from ..errors import DegeneracyError, DimensionError, DomainError
from ..numerics import dot, norm
from ..trainer.diagnostics import conflict_score, dominance_score


def solve_report(g1, g2, losses=None) -> dict:
    """Weights and diagnostics for gradients ``g1`` (distillation) and ``g2`` (task).

    With ``losses`` the weighting is computed on the log-gradients ``g_i / L_i``;
    conflict and dominance always use the gradients as given.
    """
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if g1.shape != g2.shape:
        raise DimensionError(f"gradient lengths differ ({g1.size} vs {g2.size})")
    if losses is not None:
        l1, l2 = (float(v) for v in losses)
        if not (l1 > 0 and l2 > 0):
            raise DomainError(f"losses must be positive, got ({l1}, {l2})")
        u1, u2 = g1 / l1, g2 / l2
    else:
        u1, u2 = g1, g2

    gram = moo_solver.gram2(u1, u2)
    try:
        raw = list(moo_solver.solve_closed_form_raw(gram))
        eq = moo_solver.equal_contribution_value(gram)
        degenerate = False
    except DegeneracyError:
        raw, eq, degenerate = None, None, True
    pi = moo_solver.solve_closed_form(gram)
    gstar = pi[0] * u1 + pi[1] * u2
    try:
        dom = dominance_score(g1, g2)
    except DomainError:
        dom = None
    return {
        "n": int(g1.size),
        "losses": None if losses is None else [l1, l2],
        "log_gradients": losses is not None,
        "gram": {"g11": gram.g11, "g12": gram.g12, "g22": gram.g22},
        "pi_raw": raw,
        "pi": [float(pi[0]), float(pi[1])],
        "clamped": bool(raw is not None and not (0.0 < raw[0] < 1.0)),
        "degenerate": degenerate,
        "gstar_norm": norm(gstar),
        "contributions": [dot(gstar, u1), dot(gstar, u2)],
        "equal_contribution": eq,
        "conflict": conflict_score(g1, g2),
        "dominance_log10": dom,
    }


def _num(v) -> str:
    return "n/a" if v is None else f"{v:.10g}"


def format_report(r: dict) -> str:
    g = r["gram"]
    raw = "n/a (gradients coincide)" if r["pi_raw"] is None else f"({_num(r['pi_raw'][0])}, {_num(r['pi_raw'][1])})"
    lines = [
        f"dimension          {r['n']}",
        f"weighting on       {'log-gradients' if r['log_gradients'] else 'gradients'}",
        f"gram               g11={_num(g['g11'])}  g12={_num(g['g12'])}  g22={_num(g['g22'])}",
        f"pi (raw)           {raw}",
        f"pi (clamped)       ({_num(r['pi'][0])}, {_num(r['pi'][1])})",
        f"||g*||             {_num(r['gstar_norm'])}",
        f"<g*, g_i>          ({_num(r['contributions'][0])}, {_num(r['contributions'][1])})",
        f"equal contribution {_num(r['equal_contribution'])}",
        f"conflict           {_num(r['conflict'])}",
        f"dominance (log10)  {_num(r['dominance_log10'])}",
    ]
    return "\n".join(lines)
