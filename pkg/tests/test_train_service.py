import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import PinnError
from app.core.rng import RngStream
from app.schemas.model import ModelConfig
from app.schemas.problem import Dataset
from app.schemas.train import MonitorConfig, TrainConfig
from app.services.pinn_service import eval_psi, init_params
from app.services.problem_service import build_dataset
from app.services.train_service import (
    average_losses,
    blowup_check,
    run_training,
    sgd_step,
    step_weighted_mean,
)


@pytest.fixture
def train_data(norm_squared) -> Dataset:
    return build_dataset(norm_squared, 100, 3, RngStream(0, "data"))


@pytest.fixture
def train_cfg() -> ModelConfig:
    return ModelConfig(d=3, m=100, alpha=0.0, beta=0.5, seed=3)


@pytest.fixture
def short_run() -> TrainConfig:
    return TrainConfig(T=200, eval_every=50, n_test=2000, seed=1)


class TestTrainConfig:
    def test_default_eta(self):
        assert TrainConfig().resolved_eta(16) == pytest.approx(1.0 / 16)

    def test_explicit_eta(self):
        assert TrainConfig(eta=0.3).resolved_eta(16) == 0.3

    def test_stride_longer_than_horizon(self):
        with pytest.raises(ValidationError):
            TrainConfig(T=10, eval_every=20)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            TrainConfig(learning_rate=0.1)


class TestSgdStep:
    def test_zero_rate_leaves_weights(self, small_params, train_data):
        before = small_params.W.copy()
        sgd_step(small_params, train_data, RngStream(0, "sgd"), 0.0)
        np.testing.assert_array_equal(small_params.W, before)

    def test_zero_residual_leaves_weights(self, wide_params):
        x = np.array([0.2, -0.1, 0.5])
        data = Dataset(points=x[None, :], labels=np.array([eval_psi(wide_params, x)]))
        before = wide_params.W.copy()
        sgd_step(wide_params, data, RngStream(0, "sgd"), 0.5)
        np.testing.assert_array_equal(wide_params.W, before)

    def test_single_neuron_update(self, single_neuron):
        # psi = 6, residual 3, grad_W psi = 30 x
        x = np.array([0.1, 0.2, -0.3])
        data = Dataset(points=x[None, :], labels=np.array([3.0]))
        sgd_step(single_neuron, data, RngStream(0, "sgd"), 0.01)
        np.testing.assert_allclose(single_neuron.W, -1.8 * x[None, :], rtol=1e-14)

    def test_frozen_parameters(self, small_params, train_data):
        a, b, W0 = small_params.a.copy(), small_params.b.copy(), small_params.W0.copy()
        rng = RngStream(0, "sgd")
        for _ in range(20):
            sgd_step(small_params, train_data, rng, 1e-3)
        np.testing.assert_array_equal(small_params.a, a)
        np.testing.assert_array_equal(small_params.b, b)
        np.testing.assert_array_equal(small_params.W0, W0)

    def test_negative_rate(self, small_params, train_data):
        with pytest.raises(PinnError):
            sgd_step(small_params, train_data, RngStream(0, "sgd"), -0.1)


class TestBlowupCheck:
    def test_healthy(self, small_params):
        assert blowup_check(small_params, 0.5, TrainConfig()) is None

    def test_large_weights(self, small_params):
        small_params.W[0] = 100.0
        record = blowup_check(small_params, 0.5, TrainConfig(), iteration=7)
        assert record.iteration == 7
        assert "row norm" in record.reason

    def test_large_output(self, small_params):
        record = blowup_check(small_params, 1e6, TrainConfig())
        assert "psi" in record.reason

    def test_non_finite(self, small_params):
        record = blowup_check(small_params, float("nan"), TrainConfig())
        assert "non-finite" in record.reason


class TestRunningAverages:
    def test_average_losses(self):
        np.testing.assert_allclose(average_losses([0, 2], [4.0, 0.0]), [4.0, 4.0])

    def test_every_step(self):
        values = np.array([3.0, 1.0, 2.0, 6.0])
        np.testing.assert_allclose(average_losses(np.arange(4), values), [3.0, 3.0, 2.0, 2.0])

    def test_final_value_excludes_last_loss(self):
        stamps, values = [0, 5, 10], [2.0, 1.0, 100.0]
        averages = average_losses(stamps, values)
        assert averages[-1] == pytest.approx(step_weighted_mean(stamps, values, 10))
        assert averages[-1] == pytest.approx(1.5)

    @pytest.mark.parametrize("horizon,expected", [(1, 4.0), (2, 4.0), (3, 8.0 / 3.0), (5, 8.0 / 5.0)])
    def test_step_weighted_mean(self, horizon, expected):
        assert step_weighted_mean([0, 2], [4.0, 0.0], horizon) == pytest.approx(expected)

    def test_stamps_must_start_at_zero(self):
        with pytest.raises(PinnError):
            average_losses([1, 2], [1.0, 1.0])

    def test_stamps_must_increase(self):
        with pytest.raises(PinnError):
            step_weighted_mean([0, 3, 3], [1.0, 1.0, 1.0], 4)


class TestRunTraining:
    def test_checkpoints(self, train_cfg, train_data, norm_squared, short_run):
        report = run_training(short_run, train_cfg, train_data, norm_squared)
        assert [r.t for r in report.records] == [0, 50, 100, 150, 200]
        assert not report.blew_up
        assert report.eta == pytest.approx(1.0 / 100)
        assert report.seeds == {"init": 3, "data": 0, "sgd": 1, "test": 1}

    def test_zero_iterations(self, train_cfg, train_data, norm_squared):
        report = run_training(TrainConfig(T=0, n_test=1000), train_cfg, train_data, norm_squared)
        assert len(report.records) == 1
        first = report.records[0]
        assert first.avg_train_loss == first.train_loss
        assert first.max_drift == 0.0
        np.testing.assert_array_equal(report.params.W, report.params.W0)

    def test_deterministic(self, train_cfg, train_data, norm_squared, short_run):
        a = run_training(short_run, train_cfg, train_data, norm_squared)
        b = run_training(short_run, train_cfg, train_data, norm_squared)
        assert [r.model_dump() for r in a.records] == [r.model_dump() for r in b.records]
        np.testing.assert_array_equal(a.params.W, b.params.W)

    def test_only_hidden_weights_move(self, train_cfg, train_data, norm_squared, short_run):
        report = run_training(short_run, train_cfg, train_data, norm_squared)
        init = init_params(train_cfg, RngStream(train_cfg.seed, "init"))
        np.testing.assert_array_equal(report.params.a, init.a)
        np.testing.assert_array_equal(report.params.b, init.b)
        np.testing.assert_array_equal(report.params.W0, init.W0)
        assert not np.array_equal(report.params.W, init.W)

    def test_drift_within_envelope(self, train_data, norm_squared):
        cfg = ModelConfig(d=3, m=100, alpha=0.0, beta=0.5, seed=5)
        report = run_training(TrainConfig(T=300, eval_every=30, n_test=1000), cfg, train_data, norm_squared)
        for rec in report.records:
            assert rec.max_drift <= rec.drift_envelope * (1 + 1e-12)
        drifts = [r.max_drift for r in report.records]
        assert drifts == sorted(drifts)

    def test_averages_follow_records(self, train_cfg, train_data, norm_squared, short_run):
        report = run_training(short_run, train_cfg, train_data, norm_squared)
        stamps = [r.t for r in report.records]
        expected = average_losses(stamps, [r.expected_loss for r in report.records])
        np.testing.assert_allclose([r.avg_expected_loss for r in report.records], expected)

    def test_blowup_becomes_partial_report(self, train_cfg, train_data, norm_squared):
        cfg = TrainConfig(T=100, eval_every=10, n_test=1000, blowup_w_max=1e-12)
        report = run_training(cfg, train_cfg, train_data, norm_squared)
        assert report.blew_up
        assert report.blowup.iteration == 1
        assert [r.t for r in report.records] == [0]

    def test_monitors_fill_gaps(self, train_cfg, train_data, norm_squared):
        cfg = TrainConfig(T=100, eval_every=50, n_test=1000, monitors=MonitorConfig(enabled=True, probe_size=32))
        report = run_training(cfg, train_cfg, train_data, norm_squared)
        assert report.records[0].psi_g_gap == 0.0
        assert all(r.grad_gap is not None for r in report.records)
        assert report.records[0].psi_gap_envelope == 0.0
        assert all(r.psi_gap_envelope > 0.0 for r in report.records[1:])

    def test_empty_dataset(self, train_cfg, norm_squared):
        empty = Dataset(points=np.zeros((0, 3)), labels=np.zeros(0))
        with pytest.raises(PinnError):
            run_training(TrainConfig(T=0), train_cfg, empty, norm_squared)
