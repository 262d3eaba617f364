import numpy as np
import pytest

from app.core.rng import RngStream
from app.schemas.model import ModelConfig, ModelParams
from app.services.pinn_service import init_params
from app.services.problem_service import make_target


@pytest.fixture
def rng() -> RngStream:
    return RngStream(7, "test-fixture")


@pytest.fixture
def small_cfg() -> ModelConfig:
    return ModelConfig(d=3, m=16, alpha=0.0, beta=0.5, seed=3)


@pytest.fixture
def small_params(small_cfg: ModelConfig) -> ModelParams:
    return init_params(small_cfg, RngStream(small_cfg.seed, "init"))


@pytest.fixture
def wide_params() -> ModelParams:
    """beta = 0 so that weights are O(1) and indicators switch across the ball."""
    cfg = ModelConfig(d=3, m=8, alpha=0.0, beta=0.0, seed=11)
    return init_params(cfg, RngStream(cfg.seed, "init"))


@pytest.fixture
def single_neuron() -> ModelParams:
    """m=1, a=1, w=0, b=1 in d=3: psi = 6 everywhere."""
    return ModelParams(
        a=np.array([1.0]), b=np.array([1.0]), W0=np.zeros((1, 3)), W=np.zeros((1, 3)),
    )


@pytest.fixture
def norm_squared():
    return make_target("polynomial", d=3)
