from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field


class ModelConfig(BaseModel):
    d: int = Field(default=3, ge=1)
    m: int = Field(default=100, ge=1)
    alpha: float = Field(default=0.0, ge=0.0)
    beta: float = Field(default=0.5, ge=0.0)
    seed: int = Field(default=0, ge=0)

    model_config = {"frozen": True, "extra": "forbid"}

    @property
    def a_scale(self) -> float:
        return float(self.m) ** (-self.alpha)

    @property
    def wb_scale(self) -> float:
        return float(self.m) ** (-self.beta)

    @property
    def box_volume(self) -> float:
        """|Lambda| = (2 m^-alpha) (2 m^-beta)^(d+1)."""
        return 2.0 * self.a_scale * (2.0 * self.wb_scale) ** (self.d + 1)


@dataclass
class ModelParams:
    """Two-layer ReLU^3 parameters; only `W` is ever updated."""

    a: np.ndarray   # (m,)
    b: np.ndarray   # (m,)
    W0: np.ndarray  # (m, d)
    W: np.ndarray   # (m, d)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.W0.shape[1]

    def with_weights(self, W: np.ndarray) -> "ModelParams":
        return ModelParams(a=self.a, b=self.b, W0=self.W0, W=np.array(W, dtype=np.float64))


@dataclass(frozen=True)
class BasisParams:
    """k draws theta = (a0, w0, b0) from the initialization box."""

    a0: np.ndarray  # (k,)
    w0: np.ndarray  # (k, d)
    b0: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.a0.shape[0]


@dataclass(frozen=True)
class BasisParam:
    a0: float
    w0: np.ndarray
    b0: float


@dataclass(frozen=True, eq=False)
class FmConstruction:
    """Monte-Carlo member g(x) = sum_i alpha_i . zeta(x; theta_i) of the random-feature class."""

    basis: BasisParams
    alphas: np.ndarray  # (k, d)
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.evaluator(X)
