import numpy as np
import pytest

from app.core.finite_diff import fd_gradient, fd_laplacian
from app.core.geometry import sample_unit_ball, sample_unit_sphere
from app.core.rng import RngStream
from app.schemas.model import BasisParam, BasisParams, ModelConfig, ModelParams
from app.services.pinn_service import (
    basis_combination,
    eval_phi,
    eval_pseudo_g,
    eval_pseudo_gb,
    eval_psi,
    eval_zeta,
    grad_psi_w,
    grad_pseudo_g_w,
    init_params,
    kink_margin,
    loss_grad_w,
    phi_values,
    pseudo_g_values,
    pseudo_gb_values,
    psi_and_grad_at,
    psi_neuron_sums,
    psi_values,
    psi_weight_gradient,
    zeta_coefficients,
)
from app.services.problem_service import sample_basis
from app.services.threshold_service import constants_cd


def _random_instances(count: int, margin: float):
    """(params, x) pairs whose every |w_i.x + b_i| exceeds `margin`."""
    rng = RngStream(5, "instances")
    found = []
    index = 0
    while len(found) < count:
        sub = rng.child(index)
        index += 1
        p = init_params(ModelConfig(d=3, m=6, alpha=0.0, beta=0.0), sub)
        x = 0.95 * sample_unit_ball(sub, 3, 1)[0]
        if kink_margin(p, x) > margin:
            found.append((p, x))
    return found


class TestInitParams:
    def test_support(self):
        cfg = ModelConfig(d=3, m=100, alpha=0.0, beta=0.5)
        p = init_params(cfg, RngStream(0, "init"))
        assert np.all(np.abs(p.a) <= 1.0)
        assert np.all(np.abs(p.b) <= 0.1)
        assert np.all(np.abs(p.W0) <= 0.1)
        np.testing.assert_array_equal(p.W, p.W0)
        assert p.W is not p.W0

    def test_deterministic(self, small_cfg):
        a = init_params(small_cfg, RngStream(1, "init"))
        b = init_params(small_cfg, RngStream(1, "init"))
        np.testing.assert_array_equal(a.a, b.a)
        np.testing.assert_array_equal(a.W0, b.W0)
        np.testing.assert_array_equal(a.b, b.b)

    def test_output_weights_centered(self):
        p = init_params(ModelConfig(d=1, m=1_000_000, alpha=0.0, beta=0.5), RngStream(2, "init"))
        assert abs(p.a.mean()) < 0.004


class TestPhi:
    def test_single_neuron_at_origin(self, single_neuron):
        assert eval_phi(single_neuron, np.zeros(3)) == -1.0

    def test_inactive_neuron(self):
        p = ModelParams(a=np.array([1.0]), b=np.array([-1.0]), W0=np.zeros((1, 3)), W=np.zeros((1, 3)))
        assert eval_phi(p, np.array([0.2, 0.1, 0.0])) == 0.0

    def test_exact_zero_on_boundary(self, small_params):
        X = sample_unit_sphere(RngStream(9, "boundary"), 3, 10_000)
        values = phi_values(small_params, X)
        assert np.count_nonzero(values) == 0


class TestPsi:
    def test_single_neuron_constant(self, single_neuron):
        X = sample_unit_ball(RngStream(1, "x"), 3, 20)
        np.testing.assert_array_equal(psi_values(single_neuron, X), np.full(20, 6.0))

    def test_all_inactive(self):
        p = ModelParams(a=np.ones(2), b=-np.ones(2), W0=np.zeros((2, 3)), W=np.zeros((2, 3)))
        assert eval_psi(p, np.array([0.5, 0.0, 0.0])) == 0.0

    def test_matches_fd_laplacian_of_phi(self):
        h = 1e-4
        for p, x in _random_instances(200, 10 * h):
            psi = eval_psi(p, x)
            numeric = fd_laplacian(lambda y, p=p: eval_phi(p, y), x, h)
            assert abs(psi - numeric) / (1.0 + abs(psi)) < 1e-4

    def test_single_point_path_matches_batch(self, wide_params):
        X = sample_unit_ball(RngStream(2, "x"), 3, 10)
        for x in X:
            psi, grad = psi_and_grad_at(wide_params, x)
            assert psi == pytest.approx(eval_psi(wide_params, x), rel=1e-13, abs=1e-13)
            np.testing.assert_allclose(grad, grad_psi_w(wide_params, x), rtol=1e-12, atol=1e-13)

    def test_neuron_sums_add_up(self, wide_params):
        X = sample_unit_ball(RngStream(3, "x"), 3, 40)
        weights = RngStream(3, "w").normal(40)
        total = psi_neuron_sums(wide_params, X, weights).sum()
        assert total == pytest.approx(float(weights @ psi_values(wide_params, X)), rel=1e-12, abs=1e-10)


class TestZeta:
    def test_zero_at_origin(self, small_cfg):
        theta = BasisParam(a0=0.5, w0=np.array([0.05, -0.02, 0.01]), b0=0.03)
        np.testing.assert_array_equal(eval_zeta(theta, np.zeros(3), small_cfg), np.zeros(3))

    def test_inactive_indicator(self, small_cfg):
        theta = BasisParam(a0=0.5, w0=np.zeros(3), b0=-0.05)
        np.testing.assert_array_equal(eval_zeta(theta, np.array([0.3, 0.2, 0.1]), small_cfg), np.zeros(3))

    @pytest.mark.parametrize("alpha,beta", [(0.0, 0.5), (0.25, 0.25), (0.0, 0.0)])
    def test_scale_bound(self, alpha, beta):
        cfg = ModelConfig(d=3, m=64, alpha=alpha, beta=beta)
        basis = sample_basis(cfg, RngStream(1, "basis"), 10_000)
        X = sample_unit_ball(RngStream(1, "x"), 3, 10)
        c_d, _ = constants_cd(3)
        bound = c_d * 64.0 ** (-alpha - 2 * beta)
        for x in X:
            coeff = zeta_coefficients(basis, x, 3)[0]
            assert np.max(np.abs(coeff)) * np.linalg.norm(x) <= bound


class TestPseudoNetworks:
    def test_g_equals_psi_at_init(self, small_params):
        X = sample_unit_ball(RngStream(4, "x"), 3, 10_000)
        np.testing.assert_array_equal(pseudo_g_values(small_params, X), psi_values(small_params, X))

    def test_g_inactive_at_init_is_zero(self):
        p = ModelParams(a=np.ones(2), b=-np.ones(2), W0=np.zeros((2, 3)), W=np.ones((2, 3)))
        assert eval_pseudo_g(p, np.array([0.3, 0.3, 0.3])) == 0.0

    def test_affine_decomposition(self, small_params):
        X = sample_unit_ball(RngStream(5, "x"), 3, 10_000)
        Wprime = 0.05 * RngStream(5, "w").normal(small_params.W0.shape)
        shifted = small_params.with_weights(small_params.W0 + Wprime)
        lhs = pseudo_g_values(shifted, X)
        rhs = pseudo_gb_values(small_params, Wprime, X) + psi_values(small_params, X)
        np.testing.assert_allclose(lhs, rhs, rtol=0.0, atol=1e-10)

    def test_gb_zero_weights(self, small_params):
        assert eval_pseudo_gb(small_params, np.zeros_like(small_params.W0), np.array([0.2, 0.1, 0.4])) == 0.0

    def test_gb_linear(self, small_params):
        X = sample_unit_ball(RngStream(6, "x"), 3, 10_000)
        W1 = RngStream(6, "w1").normal(small_params.W0.shape)
        W2 = RngStream(6, "w2").normal(small_params.W0.shape)
        lhs = pseudo_gb_values(small_params, 0.7 * W1 - 1.3 * W2, X)
        rhs = 0.7 * pseudo_gb_values(small_params, W1, X) - 1.3 * pseudo_gb_values(small_params, W2, X)
        np.testing.assert_allclose(lhs, rhs, rtol=0.0, atol=1e-12)

    def test_gb_is_basis_combination(self, small_params):
        X = sample_unit_ball(RngStream(7, "x"), 3, 500)
        alphas = 0.01 * RngStream(7, "alpha").normal(small_params.W0.shape)
        basis = BasisParams(a0=small_params.a, w0=small_params.W0, b0=small_params.b)
        np.testing.assert_allclose(
            pseudo_gb_values(small_params, alphas, X), basis_combination(basis, alphas, X, 3),
            rtol=0.0, atol=1e-12,
        )

    def test_g_gradient_matches_fd(self, wide_params):
        x = np.array([0.3, -0.2, 0.4])
        numeric = fd_gradient(lambda W: eval_pseudo_g(wide_params.with_weights(W), x), wide_params.W)
        np.testing.assert_allclose(grad_pseudo_g_w(wide_params, x), numeric, rtol=1e-6, atol=1e-7)


class TestGradients:
    def test_inactive_gives_zero(self):
        p = ModelParams(a=np.ones(2), b=-np.ones(2), W0=np.zeros((2, 3)), W=np.zeros((2, 3)))
        np.testing.assert_array_equal(grad_psi_w(p, np.array([0.1, 0.2, 0.3])), np.zeros((2, 3)))

    def test_single_neuron_row(self, single_neuron):
        x = np.array([0.2, -0.4, 0.1])
        np.testing.assert_allclose(grad_psi_w(single_neuron, x), 30.0 * x[None, :], rtol=1e-14)

    def test_psi_gradient_matches_fd(self):
        for p, x in _random_instances(50, 1e-5):
            numeric = fd_gradient(lambda W, p=p, x=x: eval_psi(p.with_weights(W), x), p.W)
            analytic = grad_psi_w(p, x)
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-5

    def test_loss_gradient_matches_fd(self):
        labels = RngStream(8, "labels").normal(100)
        for (p, x), label in zip(_random_instances(100, 1e-5), labels):
            numeric = fd_gradient(
                lambda W, p=p, x=x, y=label: (eval_psi(p.with_weights(W), x) - y) ** 2, p.W,
            )
            analytic = loss_grad_w(p, x, float(label))
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-5

    def test_zero_residual(self, wide_params):
        x = np.array([0.1, 0.5, -0.3])
        np.testing.assert_array_equal(
            loss_grad_w(wide_params, x, eval_psi(wide_params, x)), np.zeros_like(wide_params.W),
        )

    def test_weighted_gradient_sums_points(self, wide_params):
        X = sample_unit_ball(RngStream(9, "x"), 3, 5)
        weights = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
        expected = sum(w * grad_psi_w(wide_params, x) for w, x in zip(weights, X))
        np.testing.assert_allclose(psi_weight_gradient(wide_params, X, weights), expected, rtol=1e-12, atol=1e-12)
