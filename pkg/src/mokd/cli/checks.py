"""Seeded property suites behind ``mokd check``.

Each suite draws instances from its own RNG stream and returns ``None`` for a
passing instance or a JSON-serialisable counterexample. The solver is looked
up through the ``moo_solver`` module at call time, so a patched solver is what
gets checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kd_losses as kl
from .. import moo_solver
from ..numerics import make_rng, orthonormality_error
from ..subspace import SubspaceMap, init_subspace, retract, similarity, similarity_grads
from ..toy_tasks.gradcheck import check_gradient
from ..toy_tasks.mlp import MlpParams, init_mlp, mlp_backward, mlp_forward, pre_activations
from ..toy_tasks.quadratic import quad_losses, random_quadratic_pair
from ..weight_controller import ControllerConfig, WeightController

CHECK_SEED = 20240917


def random_pair(rng: np.random.Generator, dim: int):
    """Two vectors with squared norms log-uniform in [1e-3, 1e3] and cosine uniform in (-1, 1)."""
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(dim)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    n1, n2 = np.sqrt(10.0 ** rng.uniform(-3.0, 3.0, size=2))
    rho = rng.uniform(-1.0, 1.0)
    return n1 * u, n2 * (rho * u + math.sqrt(1.0 - rho * rho) * v)


def random_gram(rng: np.random.Generator) -> moo_solver.GramMatrix2:
    g11, g22 = 10.0 ** rng.uniform(-3.0, 3.0, size=2)
    rho = rng.uniform(-1.0, 1.0)
    return moo_solver.GramMatrix2(g11, rho * math.sqrt(g11 * g22), g22)


def _solve(g1, g2):
    pi = moo_solver.solve_closed_form(moo_solver.gram2(g1, g2))
    return pi, pi[0] * g1 + pi[1] * g2


def _interior(g1, g2):
    """Interior test computed straight from the vectors, independent of the solver."""
    d = g1 - g2
    den = d @ d
    if den <= 1e-12 * max(g1 @ g1, g2 @ g2):
        return False
    pi1 = (g2 @ g2 - g1 @ g2) / den
    return 1e-9 < pi1 < 1.0 - 1e-9


def _pair_info(g1, g2) -> dict:
    return {"g1": g1.tolist(), "g2": g2.tolist()}


def _dim(rng):
    return int(rng.integers(2, 65))


# -- solver suites ---------------------------------------------------------------

def suite_closed_form_oracle(rng):
    g = random_gram(rng)
    pi = moo_solver.solve_closed_form(g)
    ref = moo_solver.solve_simplex_qp_gram(g.as_array())
    a = moo_solver.dual_objective(g, pi)
    b = moo_solver.dual_objective(g, ref)
    if abs(a - b) > 1e-8 * max(b, 1e-12 * max(g.g11, g.g22)):
        return {"gram": [g.g11, g.g12, g.g22], "closed_form": a, "oracle": b}
    return None


def suite_simplex_qp_grid(rng):
    k = 3
    j = rng.standard_normal((k, int(rng.integers(2, 6))))
    gram = j @ j.T
    pi = moo_solver.solve_simplex_qp_gram(gram)
    t = np.linspace(0.0, 1.0, 201)
    a, b = np.meshgrid(t, t)
    mask = a + b <= 1.0
    grid = np.stack([a[mask], b[mask], 1.0 - a[mask] - b[mask]], axis=1)
    best = 0.5 * np.min(np.einsum("ij,jk,ik->i", grid, gram, grid))
    val = 0.5 * pi @ gram @ pi
    if val > best + 1e-12 * max(np.trace(gram), 1.0):
        return {"jacobian": j.tolist(), "qp": float(val), "grid": float(best)}
    return None


def suite_alignment(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    _, gs = _solve(g1, g2)
    scale = max(g1 @ g1, g2 @ g2)
    if min(gs @ g1, gs @ g2) < -1e-12 * scale:
        return {**_pair_info(g1, g2), "contributions": [gs @ g1, gs @ g2]}
    return None


def suite_equal_contribution(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    if not _interior(g1, g2):
        return None
    _, gs = _solve(g1, g2)
    c1, c2 = gs @ g1, gs @ g2
    scale = max(g1 @ g1, g2 @ g2)
    d = g1 - g2
    # det(G) / ||g1 - g2||^2 with det written as g11 * ||g2 - (g12/g11) g1||^2
    r = g2 - (g1 @ g2) / (g1 @ g1) * g1
    expected = (g1 @ g1) * (r @ r) / (d @ d)
    ok = abs(c1 - c2) <= 1e-9 * scale
    ok = ok and abs(c1 - expected) <= 1e-9 * expected and abs(c2 - expected) <= 1e-9 * expected
    if not ok:
        return {**_pair_info(g1, g2), "contributions": [c1, c2], "expected": expected}
    return None


def suite_norm_identity(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    if not _interior(g1, g2):
        return None
    _, gs = _solve(g1, g2)
    d = g1 - g2
    r = g2 - (g1 @ g2) / (g1 @ g1) * g1
    expected = (g1 @ g1) * (r @ r) / (d @ d)
    got = gs @ gs
    if abs(got - expected) > 1e-9 * expected:
        return {**_pair_info(g1, g2), "norm_sq": got, "expected": expected}
    return None


def suite_upper_bound(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    n1, n2 = np.linalg.norm(g1), np.linalg.norm(g2)
    if abs(n1 - n2) <= 1e-6:
        return None
    _, gs = _solve(g1, g2)
    bound = n1 * n2 / abs(n1 - n2)
    if np.linalg.norm(gs) > bound + 1e-9:
        return {**_pair_info(g1, g2), "norm": float(np.linalg.norm(gs)), "bound": bound}
    return None


def suite_lower_bound(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    if g1 @ g2 < 0:
        g2 = -g2
    _, gs = _solve(g1, g2)
    bound = min(np.linalg.norm(g1), np.linalg.norm(g2)) / math.sqrt(2.0)
    if np.linalg.norm(gs) < bound - 1e-9:
        return {**_pair_info(g1, g2), "norm": float(np.linalg.norm(gs)), "bound": bound}
    return None


def suite_scale_invariance(rng):
    g1, g2 = random_pair(rng, _dim(rng))
    c = 10.0 ** rng.uniform(-3.0, 3.0)
    pi, gs = _solve(g1, g2)
    pic, gsc = _solve(c * g1, c * g2)
    ok = np.allclose(pi, pic, rtol=0, atol=1e-9)
    ok = ok and abs(np.linalg.norm(gsc) - c * np.linalg.norm(gs)) <= 1e-9 * c * max(np.linalg.norm(gs), 1e-300)
    if not ok:
        return {**_pair_info(g1, g2), "c": c, "pi": pi.tolist(), "pi_scaled": pic.tolist()}
    return None


def suite_amortized_simplex(rng):
    ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=float(rng.uniform(0.001, 1.0))), k=2)
    for _ in range(50):
        ctl.step_amortized(rng.standard_normal(2) * 10.0 ** rng.uniform(-3, 3))
        pi = ctl.pi
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            return {"pi": pi.tolist()}
    return None


# -- gradient suites -------------------------------------------------------------

def suite_quadratic_gradients(rng):
    dim = int(rng.integers(2, 8))
    q = random_quadratic_pair(rng, dim)
    theta = rng.standard_normal(dim)
    _, g1, g2 = quad_losses(q, theta)
    for i, g in enumerate((g1, g2)):
        ok, err = check_gradient(lambda t: quad_losses(q, t)[0][i], g, theta, h=1e-5, tol=1e-8)
        if not ok:
            return {"task": i, "theta": theta.tolist(), "rel_error": err}
    return None


def suite_similarity_gradients(rng):
    n_t, n_s = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    n = max(n_t, n_s) + int(rng.integers(0, 4))
    m = init_subspace(n, n_t, n_s, rng)
    m = SubspaceMap(m.p_t, m.p_s, rng.uniform(-1.0, 1.0, size=n))
    z_t, z_s = rng.standard_normal(n_t), rng.standard_normal(n_s)
    g = similarity_grads(m, z_t, z_s)
    checks = {
        "z_s": (lambda x: similarity(m, z_t, x), g.d_zs, z_s),
        "d": (lambda x: similarity(SubspaceMap(m.p_t, m.p_s, x), z_t, z_s), g.d_d, m.d),
        "p_t": (lambda x: similarity(SubspaceMap(x, m.p_s, m.d), z_t, z_s), g.d_pt, m.p_t),
        "p_s": (lambda x: similarity(SubspaceMap(m.p_t, x, m.d), z_t, z_s), g.d_ps, m.p_s),
    }
    for name, (f, grad, x) in checks.items():
        ok, err = check_gradient(f, grad, x, tol=1e-6)
        if not ok:
            return {"wrt": name, "rel_error": err}
    return None


def suite_loss_gradients(rng):
    k = int(rng.integers(2, 7))
    b = int(rng.integers(1, 4))
    s, t = rng.standard_normal((b, k)), rng.standard_normal((b, k))
    tau = float(rng.uniform(0.5, 4.0))
    labels = rng.integers(0, k, size=b)
    f_s = rng.standard_normal((b, 4))
    f_t = rng.standard_normal((b, 4))
    pred = rng.standard_normal((b, 2))
    target = pred + rng.choice([-1.0, 1.0], size=pred.shape) * rng.uniform(0.1, 1.0, size=pred.shape)
    cases = {
        "kl": (lambda x: kl.kl_distill(x, t, tau), kl.kl_distill_grad(s, t, tau), s),
        "cross_entropy": (lambda x: kl.cross_entropy(x, labels), kl.cross_entropy_grad(s, labels), s),
        "normalized_l1": (lambda x: kl.normalized_l1(x, f_t), kl.normalized_l1_grad(f_s, f_t)[0], f_s),
        "mae": (lambda x: kl.mean_absolute_error(x, target), kl.mean_absolute_error_grad(pred, target), pred),
    }
    n = 6
    m = init_subspace(n, 4, 4, rng)
    m = SubspaceMap(m.p_t, m.p_s, rng.uniform(-1.0, 1.0, size=n))
    d_zs = kl.subspace_distill_grads(m, f_t, f_s)[0]
    cases["subspace_distill"] = (lambda x: kl.subspace_distill(m, f_t, x), d_zs, f_s)
    for name, (f, grad, x) in cases.items():
        ok, err = check_gradient(f, grad, x, tol=1e-6)
        if not ok:
            return {"loss": name, "rel_error": err}
    return None


def _away_from_kinks(p: MlpParams, x, margin=1e-3) -> bool:
    z1, z2 = pre_activations(p, x)
    return bool(min(np.min(np.abs(z1)), np.min(np.abs(z2))) > margin)


def suite_mlp_gradients(rng):
    in_dim, width, out_dim = int(rng.integers(2, 6)), int(rng.integers(2, 8)), int(rng.integers(2, 5))
    while True:
        p = init_mlp(rng, in_dim, width, out_dim)
        x = rng.standard_normal((2, in_dim))
        if _away_from_kinks(p, x):
            break
    labels = rng.integers(0, out_dim, size=2)
    v = rng.standard_normal((2, width))

    def loss(flat):
        q = p.unflatten(flat)
        logits, feats = mlp_forward(q, x)
        return kl.cross_entropy(logits, labels) + float(np.sum(v * feats))

    logits, _ = mlp_forward(p, x)
    grads = mlp_backward(p, x, kl.cross_entropy_grad(logits, labels), v)
    ok, err = check_gradient(loss, grads.flatten(), p.flatten(), tol=1e-6)
    if not ok:
        return {"shapes": [in_dim, width, out_dim], "rel_error": err}
    return None


def suite_retraction(rng):
    n, n_t, n_s = 12, 8, 5
    m = init_subspace(n, n_t, n_s, rng)
    for _ in range(100):
        m = retract(SubspaceMap(
            m.p_t + 0.05 * rng.standard_normal(m.p_t.shape),
            m.p_s + 0.05 * rng.standard_normal(m.p_s.shape),
            m.d,
        ))
    err = max(orthonormality_error(m.p_t), orthonormality_error(m.p_s))
    if err > 1e-10:
        return {"orthonormality_error": err}
    return None


@dataclass
class Suite:
    name: str
    run: object
    count: int


SUITES = [
    Suite("closed_form_oracle", suite_closed_form_oracle, 300),
    Suite("simplex_qp_grid", suite_simplex_qp_grid, 30),
    Suite("alignment", suite_alignment, 2000),
    Suite("equal_contribution", suite_equal_contribution, 2000),
    Suite("norm_identity", suite_norm_identity, 2000),
    Suite("upper_bound", suite_upper_bound, 2000),
    Suite("lower_bound", suite_lower_bound, 2000),
    Suite("scale_invariance", suite_scale_invariance, 1000),
    Suite("amortized_simplex", suite_amortized_simplex, 100),
    Suite("quadratic_gradients", suite_quadratic_gradients, 100),
    Suite("similarity_gradients", suite_similarity_gradients, 100),
    Suite("loss_gradients", suite_loss_gradients, 100),
    Suite("mlp_gradients", suite_mlp_gradients, 100),
    Suite("retraction", suite_retraction, 20),
]


@dataclass
class SuiteResult:
    name: str
    passed: int
    total: int
    counterexample: dict | None = field(default=None)

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def run_suite(index: int, suite: Suite, seed: int = CHECK_SEED) -> SuiteResult:
    rng = make_rng(seed, index)
    passed, first = 0, None
    for i in range(suite.count):
        try:
            bad = suite.run(rng)
        except Exception as exc:  # a crash is a failed instance, reported like any other
            bad = {"exception": f"{type(exc).__name__}: {exc}"}
        if bad is None:
            passed += 1
        elif first is None:
            first = {"instance": i, **bad}
    return SuiteResult(suite.name, passed, suite.count, first)


def run_checks(seed: int = CHECK_SEED, only=None) -> list[SuiteResult]:
    return [
        run_suite(i, s, seed)
        for i, s in enumerate(SUITES)
        if only is None or s.name in only
    ]
