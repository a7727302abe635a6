import mpmath
import numpy as np
import pytest

from mokd.errors import DimensionError, DomainError
from mokd.moo_solver import BaselineWeights, check_simplex
from mokd.numerics import make_rng
from mokd.weight_controller import (
    ControllerConfig,
    ControllerState,
    WeightController,
    log_deltas,
    log_gradient,
    loss_vector,
    rates,
)


def amortized_reference(pi, u, eta):
    """The amortized update evaluated in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    pi = [mpmath.mpf(p) for p in pi]
    u = [mpmath.mpf(x) for x in u]
    s = sum(p * x for p, x in zip(pi, u))
    raw = [p - mpmath.mpf(eta) * s * x for p, x in zip(pi, u)]
    z = sum(mpmath.e ** r for r in raw)
    return [float(mpmath.e ** r / z) for r in raw]


class TestHelpers:
    def test_log_gradient(self):
        np.testing.assert_array_equal(log_gradient([4.0, 0.0], 2.0), [2.0, 0.0])
        np.testing.assert_array_equal(log_gradient([1.0, 1.0], 1.0), [1.0, 1.0])
        np.testing.assert_array_equal(log_gradient([0.0, 0.0], 3.0), [0.0, 0.0])
        with pytest.raises(DomainError):
            log_gradient([1.0], 0.0)

    def test_rates(self):
        np.testing.assert_allclose(rates([2.0], [1.0]), [0.5])
        np.testing.assert_array_equal(rates([1.5, 2.5], [1.5, 2.5]), [0.0, 0.0])
        np.testing.assert_allclose(rates([1.0], [1.5]), [-0.5])
        with pytest.raises(DomainError):
            rates([0.0, 1.0], [1.0, 1.0])
        with pytest.raises(DimensionError):
            rates([1.0, 1.0], [1.0])

    def test_log_deltas(self):
        np.testing.assert_allclose(log_deltas([np.e, 1.0], [1.0, 1.0]), [1.0, 0.0])

    def test_loss_vector_names_offender(self):
        with pytest.raises(DomainError, match="task"):
            loss_vector([1.0, -2.0], names=("distill", "task"))

    def test_config_validation(self):
        for bad in (dict(mode="other"), dict(eta_pi=0.0), dict(gamma=-1.0), dict(amortized_signal="x")):
            with pytest.raises(ValueError):
                ControllerConfig(**bad)

    def test_initial_state(self):
        st = ControllerState.initial(3)
        np.testing.assert_allclose(st.pi, [1 / 3] * 3)
        assert st.step_count == 0 and st.last_losses is None


class TestExact:
    def test_unit_losses_symmetric(self):
        ctl = WeightController(ControllerConfig(mode="exact"))
        pi, upd = ctl.step_exact([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
        np.testing.assert_allclose(pi, [0.5, 0.5])
        np.testing.assert_allclose(upd, [0.5, 0.5])

    def test_losses_rescale_to_symmetric(self):
        ctl = WeightController()
        pi, upd = ctl.step_exact([[2.0, 0.0], [0.0, 1.0]], [2.0, 1.0])
        np.testing.assert_allclose(pi, [0.5, 0.5])
        np.testing.assert_allclose(upd, [0.5, 0.5])

    def test_vertex_case(self):
        ctl = WeightController()
        pi, upd = ctl.step_exact([[2.0, 0.0], [1.0, 0.0]], [1.0, 1.0])
        np.testing.assert_array_equal(pi, [0.0, 1.0])
        np.testing.assert_array_equal(upd, [1.0, 0.0])
        np.testing.assert_array_equal(ctl.pi, [0.0, 1.0])
        assert ctl.state.step_count == 1

    def test_identical_log_gradients_degenerate(self):
        ctl = WeightController()
        pi, upd = ctl.step_exact([[2.0, 4.0], [1.0, 2.0]], [2.0, 1.0])
        np.testing.assert_array_equal(pi, [0.5, 0.5])
        np.testing.assert_allclose(upd, [1.0, 2.0])

    def test_alignment_with_log_gradients(self):
        rng = make_rng(30)
        ctl = WeightController()
        for _ in range(500):
            g = rng.standard_normal((2, 8)) * 10.0 ** rng.uniform(-2, 2, size=(2, 1))
            losses = 10.0 ** rng.uniform(-2, 2, size=2)
            pi, upd = ctl.step_exact(g, losses)
            check_simplex(pi)
            lg = g / losses[:, None]
            scale = max(lg[0] @ lg[0], lg[1] @ lg[1])
            assert min(upd @ lg[0], upd @ lg[1]) >= -1e-12 * scale

    def test_three_tasks_use_qp(self):
        ctl = WeightController(k=3)
        pi, upd = ctl.step_exact(np.eye(3), [1.0, 1.0, 1.0])
        np.testing.assert_allclose(pi, [1 / 3] * 3, atol=1e-9)

    def test_rejects_bad_inputs(self):
        ctl = WeightController()
        with pytest.raises(DomainError):
            ctl.step_exact([[1.0], [1.0]], [1.0, 0.0])
        with pytest.raises(DimensionError):
            ctl.step_exact([[1.0], [1.0], [1.0]], [1.0, 1.0, 1.0])


class TestAmortized:
    def test_zero_signal_fixed_point(self):
        ctl = WeightController(ControllerConfig(mode="amortized"))
        np.testing.assert_array_equal(ctl.step_amortized([0.0, 0.0]), [0.5, 0.5])

    def test_worked_example_against_high_precision(self):
        ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=1.0))
        out = ctl.step_amortized([0.4, 0.0])
        ref = amortized_reference([0.5, 0.5], [0.4, 0.0], 1.0)
        np.testing.assert_allclose(out, ref, rtol=0, atol=1e-15)
        np.testing.assert_allclose(out, [0.4800, 0.5200], atol=5e-5)

    def test_equal_signal_keeps_equal_weights(self):
        for c in (-3.0, 0.1, 7.5):
            ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=0.3))
            np.testing.assert_allclose(ctl.step_amortized([c, c]), [0.5, 0.5], atol=1e-15)

    def test_matches_reference_on_random_instances(self):
        rng = make_rng(31)
        for _ in range(50):
            eta = float(rng.uniform(0.01, 2.0))
            ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=eta))
            pi = ctl.pi
            for _ in range(5):
                u = rng.standard_normal(2)
                ref = amortized_reference(pi, u, eta)
                pi = ctl.step_amortized(u)
                np.testing.assert_allclose(pi, ref, atol=1e-14)

    def test_faster_task_is_downweighted_from_equal_weights(self):
        rng = make_rng(32)
        for _ in range(500):
            u2 = rng.uniform(0.0, 1.0)
            u1 = u2 + rng.uniform(1e-3, 1.0)
            ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=float(rng.uniform(0.01, 1.0))))
            ctl.step_amortized([u1, u2])
            assert ctl.pi[0] < 0.5

    def test_faster_task_loses_weight_relative_to_zero_signal(self):
        # softmax of the weights themselves pulls toward uniform, so an arbitrary
        # start is compared against the same step with no signal
        rng = make_rng(34)
        for _ in range(500):
            u2 = rng.uniform(0.0, 1.0)
            u1 = u2 + rng.uniform(1e-3, 1.0)
            p = float(rng.uniform(0.05, 0.95))
            cfg = ControllerConfig(mode="amortized", eta_pi=float(rng.uniform(0.01, 1.0)))
            ctl, ref = WeightController(cfg), WeightController(cfg)
            ctl.state.pi = np.array([p, 1.0 - p])
            ref.state.pi = np.array([p, 1.0 - p])
            ctl.step_amortized([u1, u2])
            ref.step_amortized([0.0, 0.0])
            assert ctl.pi[0] < ref.pi[0]

    def test_stays_on_simplex(self):
        rng = make_rng(33)
        ctl = WeightController(ControllerConfig(mode="amortized", eta_pi=5.0), k=3)
        for _ in range(1000):
            check_simplex(ctl.step_amortized(rng.standard_normal(3) * 100))

    def test_signal_switch(self):
        before, after = np.array([2.0, 1.0]), np.array([1.0, 0.5])
        imp = WeightController(ControllerConfig(mode="amortized"))
        raw = WeightController(ControllerConfig(mode="amortized", amortized_signal="raw_log_loss"))
        np.testing.assert_allclose(imp.amortized_signal(before, after), np.log(2.0) * np.ones(2))
        np.testing.assert_allclose(raw.amortized_signal(before, after), np.log(before))

    def test_signal_length_checked(self):
        with pytest.raises(DimensionError):
            WeightController(ControllerConfig(mode="amortized")).step_amortized([1.0, 2.0, 3.0])


class TestFixed:
    @pytest.mark.parametrize(
        "alpha, g, expected",
        [
            ((0.5, 0.5), [[1, 0], [0, 1]], [0.5, 0.5]),
            ((1, 1), [[1, 0], [1, 0]], [2, 0]),
            ((2, 0.5), [[1, 0], [0, 2]], [2, 1]),
        ],
    )
    def test_examples(self, alpha, g, expected):
        ctl = WeightController(ControllerConfig(mode="fixed", fixed_alpha=BaselineWeights(*alpha)))
        np.testing.assert_allclose(ctl.step_fixed(g), expected)
        np.testing.assert_allclose(ctl.pi, np.array(alpha) / sum(alpha))

    def test_two_tasks_only(self):
        with pytest.raises(ValueError):
            WeightController(ControllerConfig(mode="fixed"), k=3)
