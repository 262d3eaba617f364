import numpy as np
import pytest

from app.core.constants import RADEMACHER_RATIO_WINDOW
from app.core.exceptions import PinnError
from app.core.geometry import sample_unit_ball
from app.core.rng import RngStream
from app.schemas.model import ModelConfig
from app.schemas.theory import AscentConfig
from app.services.pinn_service import init_params, psi_values
from app.services.rademacher_service import rademacher_estimate

QUICK = AscentConfig(restarts=1, steps=5, step_size=0.25)


@pytest.fixture
def points() -> np.ndarray:
    return sample_unit_ball(RngStream(0, "points"), 3, 25)


class TestRademacherEstimate:
    def test_zero_radius_is_signed_average(self, small_params, points):
        rng = RngStream(1, "signs")
        result = rademacher_estimate(small_params, points, 0.0, 4, rng, QUICK)
        psi = psi_values(small_params, points)
        manual = np.mean([rng.child(i).signs(25) / 25 @ psi for i in range(4)])
        assert result.estimate == pytest.approx(manual, rel=1e-10, abs=1e-14)
        assert result.bound_form == 0.0
        assert result.kappa is None

    def test_ascent_never_below_start(self, small_params, points):
        flat = rademacher_estimate(small_params, points, 0.0, 3, RngStream(2, "signs"), QUICK)
        ball = rademacher_estimate(small_params, points, 0.1, 3, RngStream(2, "signs"), QUICK)
        assert ball.estimate >= flat.estimate - 1e-15

    def test_bound_form(self, small_params, points):
        result = rademacher_estimate(small_params, points, 0.1, 2, RngStream(3, "signs"), QUICK, alpha=0.5)
        assert result.bound_form == pytest.approx(16**-0.5 * 0.1 / 5.0)
        assert result.kappa == pytest.approx(result.estimate / result.bound_form)
        assert result.n_points == 25

    def test_reproducible(self, small_params, points):
        a = rademacher_estimate(small_params, points, 0.05, 2, RngStream(4, "signs"), QUICK)
        b = rademacher_estimate(small_params, points, 0.05, 2, RngStream(4, "signs"), QUICK)
        assert a == b

    def test_single_draw_has_no_error_bar(self, small_params, points):
        result = rademacher_estimate(small_params, points, 0.05, 1, RngStream(5, "signs"), QUICK)
        assert result.standard_error == 0.0

    @pytest.mark.parametrize("tau,draws", [(-0.1, 2), (0.1, 0)])
    def test_invalid_arguments(self, small_params, points, tau, draws):
        with pytest.raises(PinnError):
            rademacher_estimate(small_params, points, tau, draws, RngStream(6, "signs"), QUICK)

    def test_ball_is_centred_at_initialization(self, small_params, points):
        trained = small_params.with_weights(small_params.W0 + 0.5)
        fresh = rademacher_estimate(small_params, points, 0.0, 3, RngStream(7, "signs"), QUICK)
        moved = rademacher_estimate(trained, points, 0.0, 3, RngStream(7, "signs"), QUICK)
        assert moved.estimate == fresh.estimate
        fresh = rademacher_estimate(small_params, points, 0.05, 2, RngStream(8, "signs"), QUICK)
        moved = rademacher_estimate(trained, points, 0.05, 2, RngStream(8, "signs"), QUICK)
        assert moved.estimate == fresh.estimate


def test_quadrupling_samples_halves_estimate():
    cfg = ModelConfig(d=3, m=256, seed=0)
    p = init_params(cfg, RngStream(0, "init"))
    X = sample_unit_ball(RngStream(0, "rademacher_points"), 3, 400)
    small = rademacher_estimate(p, X[:100], 0.05, 40, RngStream(0, "signs"), QUICK)
    large = rademacher_estimate(p, X, 0.05, 40, RngStream(0, "signs"), QUICK)
    low, high = RADEMACHER_RATIO_WINDOW
    assert low <= small.estimate / large.estimate <= high
