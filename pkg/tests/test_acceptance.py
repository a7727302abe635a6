"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (collected again in the terminal
summary) before asserting.
"""

import csv
import dataclasses
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from mokd import kd_losses as kl
from mokd.cli import main
from mokd.cli.config import load_config, resolve_config_path
from mokd.moo_solver import GramMatrix2, dual_objective, gram2, solve_closed_form, solve_simplex_qp_gram
from mokd.numerics import make_rng, orthonormality_error
from mokd.subspace import SubspaceMap, init_subspace, similarity, similarity_grads
from mokd.toy_tasks.gradcheck import check_gradient
from mokd.toy_tasks.mlp import init_mlp, mlp_backward, mlp_forward, pre_activations
from mokd.toy_tasks.quadratic import quad_losses, random_quadratic_pair
from mokd.trainer import Trainer, pareto_dominates, run
from mokd.trainer.loop import build_workload

pytestmark = pytest.mark.acceptance

SEED = 1234
ARTIFACTS = Path(os.environ.get("MOKD_ARTIFACT_DIR", Path(__file__).resolve().parent.parent / "artifacts"))


def random_pair(rng, dim):
    """Squared norms log-uniform in [1e-3, 1e3], cosine uniform in (-1, 1)."""
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(dim)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    n1, n2 = np.sqrt(10.0 ** rng.uniform(-3.0, 3.0, size=2))
    rho = rng.uniform(-1.0, 1.0)
    return n1 * u, n2 * (rho * u + math.sqrt(1.0 - rho * rho) * v)


def test_closed_form_matches_simplex_oracle(verdict):
    rng = make_rng(SEED, 1)
    start = time.perf_counter()
    worst, failures = 0.0, 0
    for _ in range(1000):
        g11, g22 = 10.0 ** rng.uniform(-3.0, 3.0, size=2)
        rho = rng.uniform(-1.0, 1.0)
        g = GramMatrix2(g11, rho * math.sqrt(g11 * g22), g22)
        closed = dual_objective(g, solve_closed_form(g))
        pi_qp = solve_simplex_qp_gram(np.array([[g.g11, g.g12], [g.g12, g.g22]]))
        oracle = dual_objective(g, pi_qp)
        # objectives that vanish to rounding are compared against a scale-relative floor
        rel = abs(closed - oracle) / max(oracle, 1e-12 * max(g11, g22))
        worst = max(worst, rel)
        failures += bool(rel > 1e-8)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 5.0
    assert verdict(1, "closed form vs simplex oracle", ok,
                   f"1000 Grams, {failures} failures, worst rel {worst:.2e}, {elapsed:.2f}s")


def test_min_norm_properties_on_random_pairs(verdict):
    rng = make_rng(SEED, 2)
    start = time.perf_counter()
    counts = dict(equal=0, identity=0, alignment=0, upper=0, lower=0)
    checked = dict(interior=0, upper=0, lower=0)
    worst_identity = 0.0
    for _ in range(100_000):
        g1, g2 = random_pair(rng, int(rng.integers(2, 513)))
        pi = solve_closed_form(gram2(g1, g2))
        gs = pi[0] * g1 + pi[1] * g2
        c1, c2 = gs @ g1, gs @ g2
        a11, a22, a12 = g1 @ g1, g2 @ g2, g1 @ g2
        scale = max(a11, a22)
        counts["alignment"] += bool(min(c1, c2) < -1e-12 * scale)

        d = g1 - g2
        den = d @ d
        interior = den > 1e-12 * scale and 1e-9 < (a22 - a12) / den < 1.0 - 1e-9
        if interior:
            checked["interior"] += 1
            counts["equal"] += bool(abs(c1 - c2) > 1e-9 * scale)
            # det / den with the determinant formed without cancellation
            if a11 >= a22:
                r = g2 - (a12 / a11) * g1
                expected = a11 * (r @ r) / den
            else:
                r = g1 - (a12 / a22) * g2
                expected = a22 * (r @ r) / den
            err = max(abs(c1 - expected), abs(c2 - expected)) / expected
            worst_identity = max(worst_identity, err)
            counts["identity"] += bool(err > 1e-9)

        n1, n2 = math.sqrt(a11), math.sqrt(a22)
        gnorm = float(np.linalg.norm(gs))
        if abs(n1 - n2) > 1e-6:
            checked["upper"] += 1
            counts["upper"] += gnorm > n1 * n2 / abs(n1 - n2) + 1e-9
        if a12 >= 0:
            checked["lower"] += 1
            counts["lower"] += gnorm < min(n1, n2) / math.sqrt(2.0) - 1e-9
    elapsed = time.perf_counter() - start
    ok = not any(counts.values()) and elapsed < 30.0
    detail = (f"100000 pairs ({checked['interior']} interior, {checked['upper']} upper, {checked['lower']} lower), "
              f"failures {counts}, worst identity rel {worst_identity:.2e}, {elapsed:.1f}s")
    assert verdict(2, "min-norm properties", ok, detail)


def test_analytic_gradients_match_finite_differences(verdict):
    rng = make_rng(SEED, 3)
    start = time.perf_counter()
    worst = {}
    n = 100

    def record(name, ok_err, tol):
        ok, err = ok_err
        worst[name] = max(worst.get(name, 0.0), err)
        return ok and err <= tol

    good = True
    for _ in range(n):
        q = random_quadratic_pair(rng, int(rng.integers(2, 12)))
        theta = rng.standard_normal(q.dim)
        _, g1, g2 = quad_losses(q, theta)
        for i, g in enumerate((g1, g2)):
            good &= record("quadratic", check_gradient(lambda t: quad_losses(q, t)[0][i], g, theta, h=1e-5, tol=1e-8), 1e-8)

    for _ in range(n):
        base = init_subspace(7, 5, 4, rng)
        m = SubspaceMap(base.p_t, base.p_s, rng.uniform(-1, 1, 7))
        z_t, z_s = rng.standard_normal(5), rng.standard_normal(4)
        g = similarity_grads(m, z_t, z_s)
        for f, grad, x in [
            (lambda x: similarity(m, z_t, x), g.d_zs, z_s),
            (lambda x: similarity(SubspaceMap(m.p_t, m.p_s, x), z_t, z_s), g.d_d, m.d),
            (lambda x: similarity(SubspaceMap(x, m.p_s, m.d), z_t, z_s), g.d_pt, m.p_t),
            (lambda x: similarity(SubspaceMap(m.p_t, x, m.d), z_t, z_s), g.d_ps, m.p_s),
        ]:
            good &= record("similarity", check_gradient(f, grad, x), 1e-6)

    for _ in range(n):
        k, b = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        s, t = rng.standard_normal((b, k)), rng.standard_normal((b, k))
        tau = float(rng.uniform(0.5, 4.0))
        labels = rng.integers(0, k, size=b)
        fa, fb = rng.standard_normal((b, 4)), rng.standard_normal((b, 4))
        pred = rng.standard_normal((b, 2))
        target = pred + rng.choice([-1.0, 1.0], size=pred.shape) * rng.uniform(0.1, 1.0, size=pred.shape)
        base = init_subspace(6, 4, 4, rng)
        m = SubspaceMap(base.p_t, base.p_s, rng.uniform(-1, 1, 6))
        d_zs, d_d, _, _ = kl.subspace_distill_grads(m, fa, fb)
        for f, grad, x in [
            (lambda x: kl.kl_distill(x, t, tau), kl.kl_distill_grad(s, t, tau), s),
            (lambda x: kl.cross_entropy(x, labels), kl.cross_entropy_grad(s, labels), s),
            (lambda x: kl.normalized_l1(fa, x), kl.normalized_l1_grad(fa, fb)[1], fb),
            (lambda x: kl.mean_absolute_error(x, target), kl.mean_absolute_error_grad(pred, target), pred),
            (lambda x: kl.subspace_distill(m, fa, x), d_zs, fb),
            (lambda x: kl.subspace_distill(SubspaceMap(m.p_t, m.p_s, x), fa, fb), d_d, m.d),
        ]:
            good &= record("losses", check_gradient(f, grad, x), 1e-6)

    done = 0
    while done < n:
        p = init_mlp(rng, 4, 6, 3)
        p.b1 = 0.1 * rng.standard_normal(6)
        p.b2 = 0.1 * rng.standard_normal(6)
        x = rng.standard_normal((3, 4))
        z1, z2 = pre_activations(p, x)
        if min(np.abs(z1).min(), np.abs(z2).min()) < 1e-3:
            continue  # central differences straddling a ReLU kink are not a gradient
        y = rng.integers(0, 3, size=3)
        logits, feats = mlp_forward(p, x)
        w_feat = rng.standard_normal(feats.shape)
        grads = mlp_backward(p, x, kl.cross_entropy_grad(logits, y), w_feat)

        def loss(flat):
            lo, fe = mlp_forward(p.unflatten(flat), x)
            return kl.cross_entropy(lo, y) + float(np.sum(w_feat * fe))

        good &= record("mlp", check_gradient(loss, grads.flatten(), p.flatten(), h=1e-5), 1e-6)
        done += 1

    elapsed = time.perf_counter() - start
    ok = bool(good) and elapsed < 60.0
    detail = ", ".join(f"{k} worst {v:.1e}" for k, v in worst.items()) + f"; {n} instances each, {elapsed:.1f}s"
    assert verdict(3, "gradient correctness", ok, detail)


def test_adapter_stays_orthonormal(verdict):
    cfg = dataclasses.replace(load_config("blobs_kd_exact"), steps=1000)
    tr = Trainer(cfg)
    for _ in range(cfg.steps):
        tr.step()
    _, smap = tr.workload.unpack(tr.theta)
    et, es = orthonormality_error(smap.p_t), orthonormality_error(smap.p_s)
    ok = et <= 1e-10 and es <= 1e-10
    assert verdict(4, "orthonormality", ok, f"after 1000 steps P_t {et:.1e}, P_s {es:.1e}")


def test_exact_mode_reaches_pareto_front(verdict, tmp_path):
    cfg = load_config("two_quadratic_exact")
    assert (cfg.dim, cfg.steps, cfg.eta_theta, cfg.controller.mode) == (10, 5000, 1e-2, "exact")
    start = time.perf_counter()
    res = run(cfg, trace_path=tmp_path / "trace.csv")
    elapsed = time.perf_counter() - start
    final = np.array(res.summary["final_losses"])
    dominated = sum(pareto_dominates(r.losses, final) for r in res.rows)
    dist = res.summary["final_pareto_distance"]
    ok = dist <= 1e-4 and dominated == 0 and elapsed < 10.0
    assert verdict(5, "Pareto convergence", ok,
                   f"pareto_distance {dist:.2e}, dominating iterates {dominated}, {elapsed:.2f}s")


def _read_trace(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fixed_weights_oppose_min_norm_does_not(verdict, tmp_path):
    fixed_cfg = load_config("two_quadratic_conflict_fixed")
    assert fixed_cfg.conflict and fixed_cfg.steps == 500
    assert (fixed_cfg.controller.fixed_alpha.alpha1, fixed_cfg.controller.fixed_alpha.alpha2) == (0.5, 0.5)
    exact_cfg = dataclasses.replace(
        fixed_cfg, controller=dataclasses.replace(fixed_cfg.controller, mode="exact")
    )

    # fixed baseline, replaying each step's raw gradients to check opposition and the trace formulas
    tr = Trainer(fixed_cfg)
    opposed, formula_err, rows = 0, 0.0, []
    for _ in range(fixed_cfg.steps):
        _, g = tr.workload.probe_task_gradients(tr.theta, None)
        row = tr.step()
        rows.append(row)
        g_tot = 0.5 * g[0] + 0.5 * g[1]
        opposed += min(g_tot @ g[0], g_tot @ g[1]) < 0
        formula_err = max(
            formula_err,
            abs(row.conflict - g[0] @ g[1]) / max(abs(g[0] @ g[1]), 1e-300),
            abs(row.dominance_log10 - math.log10(np.linalg.norm(g[0]) / np.linalg.norm(g[1]))),
        )
    fixed_frac = opposed / fixed_cfg.steps

    trace = tmp_path / "exact.csv"
    res = run(exact_cfg, trace_path=trace)
    aligned = sum(min(r.alignment) >= -1e-10 * r.alignment_scale for r in res.rows)
    table = _read_trace(trace)
    populated = all(row["conflict"] != "" and row["dominance_log10"] != "" for row in table)
    conflicts = sum(float(row["conflict"]) < 0 for row in table)

    ok = fixed_frac >= 0.01 and aligned == exact_cfg.steps and populated and formula_err <= 1e-12
    detail = (f"fixed opposes in {opposed}/500 ({100 * fixed_frac:.1f}%), min-norm aligned in {aligned}/500, "
              f"conflict<0 rows {conflicts}, columns populated {populated}, formula err {formula_err:.1e}")
    assert verdict(6, "conflict analog", ok, detail)


def test_amortized_accounting_and_convergence(verdict):
    parts, ok = [], True
    for steps in (1, 7, 123):
        for mode in ("exact", "amortized"):
            cfg = dataclasses.replace(load_config(f"two_quadratic_{mode}"), steps=steps)
            s = run(cfg).summary
            if mode == "exact":
                ok &= s["per_task_gradient_evals"] == 2 * steps and s["combined_gradient_evals"] == 0
            else:
                ok &= s["combined_gradient_evals"] == steps and s["loss_only_evals"] == steps
                ok &= s["per_task_gradient_evals"] == 0
    for mode in ("exact", "amortized"):
        cfg = dataclasses.replace(load_config(f"two_quadratic_{mode}"), steps=10_000)
        s = run(cfg).summary
        if mode == "exact":
            ok &= s["per_task_gradient_evals"] == 20_000 and s["combined_gradient_evals"] == 0
        else:
            ok &= s["combined_gradient_evals"] == 10_000 and s["loss_only_evals"] == 10_000
            ok &= s["per_task_gradient_evals"] == 0
        ok &= s["min_pareto_distance"] <= 1e-3
        parts.append(f"{mode}: per-task {s['per_task_gradient_evals']}, combined {s['combined_gradient_evals']}, "
                     f"loss-only {s['loss_only_evals']}, min pareto {s['min_pareto_distance']:.1e}")
    assert verdict(7, "amortization accounting", bool(ok), "; ".join(parts))


def test_toy_distillation_end_to_end(verdict, tmp_path):
    cfg = load_config("blobs_kd_amortized")
    assert (cfg.num_classes, cfg.input_dim, cfg.num_samples, cfg.teacher_width, cfg.student_width) == (8, 32, 4096, 128, 32)
    traces, times, summaries = [], [], []
    for i in range(2):
        start = time.perf_counter()
        wl = build_workload(cfg)
        teacher_before = wl.teacher.flatten().copy()
        res = run(cfg, workload=wl, trace_path=tmp_path / f"run{i}.csv")
        times.append(time.perf_counter() - start)
        assert wl.teacher.flatten().tobytes() == teacher_before.tobytes()
        traces.append((tmp_path / f"run{i}.csv").read_bytes())
        summaries.append(res)
    res = summaries[0]
    positive = all(min(r.losses) > 0 for r in res.rows)
    identical = traces[0] == traces[1]

    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    out = ARTIFACTS / "pi_trajectory_blobs_kd.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "pi_distill", "pi_task", "loss_distill", "loss_task"])
        for r in res.rows:
            w.writerow([r.iter, "%.17g" % r.pi[0], "%.17g" % r.pi[1], "%.17g" % r.losses[0], "%.17g" % r.losses[1]])
    (ARTIFACTS / "blobs_kd_summary.json").write_text(json.dumps(res.summary, indent=2) + "\n")

    ok = positive and identical and max(times) < 120.0
    pi = res.summary["final_pi"]
    detail = (f"{cfg.steps} steps in {max(times):.1f}s, losses positive {positive}, traces identical {identical}, "
              f"final pi ({pi[0]:.3f}, {pi[1]:.3f}), student val acc {res.summary['student_val_accuracy']:.3f}, "
              f"trajectory -> {out}")
    assert verdict(8, "toy KD end-to-end", ok, detail)


def test_commands_are_deterministic(verdict, tmp_path, capsys):
    results = {}
    configs = ["two_quadratic_exact", "two_quadratic_amortized", "two_quadratic_conflict_fixed"]
    small = tmp_path / "toy_detection_small.json"
    data = json.loads(resolve_config_path("toy_detection_amortized").read_text())
    data["steps"] = 100
    small.write_text(json.dumps(data))
    for name in configs + [str(small)]:
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        codes = (main(["train", "--config", name, "--trace", str(a)]), main(["train", "--config", name, "--trace", str(b)]))
        results[Path(name).stem] = codes == (0, 0) and a.read_bytes() == b.read_bytes()
    a, b = tmp_path / "a_bench.csv", tmp_path / "b_bench.csv"
    codes = (main(["bench", "--angles", "9", "--ratios", "7", "--out", str(a)]),
             main(["bench", "--angles", "9", "--ratios", "7", "--out", str(b)]))
    results["bench"] = codes == (0, 0) and a.read_bytes() == b.read_bytes()
    capsys.readouterr()
    main(["check", "--suite", "alignment"])
    first = capsys.readouterr().out
    main(["check", "--suite", "alignment"])
    results["check"] = capsys.readouterr().out == first
    ok = all(results.values())
    assert verdict(9, "determinism", ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in results.items()))

