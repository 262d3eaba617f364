import numpy as np
import pytest
from scipy import stats

from app.core.exceptions import NonFiniteError, PinnError
from app.core.finite_diff import fd_gradient, fd_laplacian
from app.core.geometry import NormKind, matrix_norm, sample_unit_ball, sample_unit_sphere
from app.core.rng import RngStream, make_rng_stream


class TestRngStream:
    def test_same_key_same_draws(self):
        a = make_rng_stream(7, "init").random(100)
        b = make_rng_stream(7, "init").random(100)
        np.testing.assert_array_equal(a, b)

    def test_labels_give_different_streams(self):
        a = make_rng_stream(7, "init").random(100)
        b = make_rng_stream(7, "data").random(100)
        assert not np.array_equal(a, b)

    def test_seeds_give_different_streams(self):
        a = make_rng_stream(7, "x").random(100)
        b = make_rng_stream(8, "x").random(100)
        assert not np.array_equal(a, b)

    def test_draws_are_unit_interval(self):
        draws = make_rng_stream(1, "u").random(10_000)
        assert draws.min() >= 0.0 and draws.max() < 1.0

    def test_child_streams_are_reproducible(self):
        parent = RngStream(3, "trials")
        np.testing.assert_array_equal(parent.child(4).random(5), RngStream(3, "trials/4").random(5))

    def test_empty_label_rejected(self):
        with pytest.raises(PinnError):
            RngStream(1, "")

    def test_signs_are_plus_minus_one(self):
        signs = RngStream(2, "signs").signs(1000)
        assert set(np.unique(signs)) == {-1.0, 1.0}


class TestBallSampling:
    def test_points_inside_ball(self):
        X = sample_unit_ball(RngStream(0, "ball"), 3, 50_000)
        assert X.shape == (50_000, 3)
        assert np.all(np.linalg.norm(X, axis=1) <= 1.0)

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_mean_radius(self, d):
        n = 200_000
        radius = np.linalg.norm(sample_unit_ball(RngStream(d, "radius"), d, n), axis=1)
        expected = d / (d + 1)
        # Var |x| = d/(d+2) - (d/(d+1))^2
        stderr = np.sqrt(d / (d + 2) - expected**2) / np.sqrt(n)
        assert abs(radius.mean() - expected) < 4 * stderr

    def test_one_dimensional_is_uniform(self):
        x = sample_unit_ball(RngStream(1, "ks"), 1, 200_000)[:, 0]
        result = stats.kstest(x, stats.uniform(loc=-1.0, scale=2.0).cdf)
        assert result.statistic < 0.005

    def test_two_draws_per_call(self):
        rng = RngStream(2, "calls")
        sample_unit_ball(rng, 3, 500)
        assert rng.calls == 2

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            sample_unit_ball(RngStream(1, "bad"), 0, 10)

    def test_sphere_points_have_unit_norm(self):
        X = sample_unit_sphere(RngStream(1, "sphere"), 4, 1000)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, rtol=1e-14)


class TestMatrixNorm:
    def test_identity(self):
        eye = np.eye(2)
        assert matrix_norm(eye, NormKind.two_inf) == 1.0
        assert matrix_norm(eye, NormKind.frobenius) == pytest.approx(np.sqrt(2.0))
        assert matrix_norm(eye, NormKind.two_one) == 2.0

    def test_zero(self):
        zero = np.zeros((3, 2))
        for kind in NormKind:
            assert matrix_norm(zero, kind) == 0.0

    def test_rows(self):
        W = np.array([[3.0, 4.0], [0.0, 0.0]])
        assert matrix_norm(W, "two_inf") == 5.0
        assert matrix_norm(W, "frobenius") == 5.0
        assert matrix_norm(W, "two_one") == 5.0

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            matrix_norm(np.array([[np.nan, 1.0]]), NormKind.frobenius)


class TestFiniteDifferences:
    def test_laplacian_of_norm_squared(self):
        x = np.array([0.1, -0.3, 0.2])
        value = fd_laplacian(lambda y: float(np.dot(y, y)), x, 1e-4)
        assert value == pytest.approx(6.0, abs=1e-6)

    def test_laplacian_of_constant(self):
        assert abs(fd_laplacian(lambda y: 2.5, np.zeros(3), 1e-4)) < 1e-8

    def test_laplacian_of_cubic(self):
        # Laplacian of x1^3 + x1 x2^2 is 6 x1 + 2 x1
        x = np.array([0.3, 0.2])
        value = fd_laplacian(lambda y: y[0] ** 3 + y[0] * y[1] ** 2, x, 1e-4)
        assert value == pytest.approx(8.0 * x[0], abs=1e-7)

    def test_gradient_of_frobenius_squared(self):
        W = RngStream(4, "W").normal((3, 2))
        grad = fd_gradient(lambda M: float(np.sum(M * M)), W, 1e-6)
        np.testing.assert_allclose(grad, 2.0 * W, atol=1e-8)

    def test_gradient_of_constant(self):
        grad = fd_gradient(lambda M: 1.0, np.ones((2, 2)))
        np.testing.assert_array_equal(grad, np.zeros((2, 2)))

    def test_gradient_leaves_input_untouched(self):
        W = np.arange(6.0).reshape(3, 2)
        before = W.copy()
        fd_gradient(lambda M: float(M.sum()), W)
        np.testing.assert_array_equal(W, before)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            fd_laplacian(lambda y: 0.0, np.zeros(2), 0.0)
