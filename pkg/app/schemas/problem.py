import enum
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from app.schemas.model import ModelConfig


class TargetKind(str, enum.Enum):
    polynomial = "polynomial"
    represented = "represented"
    custom = "custom"


class FieldKind(str, enum.Enum):
    # a field that ignores the output weight integrates to f = 0, since a0 is symmetric
    constant = "constant"                # v(theta) = c
    output_weighted = "output_weighted"  # v(theta) = c * a_hat * b_hat^power, hats rescale to [-1, 1]


class TargetPreset(str, enum.Enum):
    norm_squared = "norm_squared"


class MonomialTerm(BaseModel):
    coefficient: float
    exponents: list[int] = Field(min_length=1)

    model_config = {"extra": "forbid"}


class TargetSpec(BaseModel):
    kind: TargetKind = TargetKind.polynomial
    preset: TargetPreset | None = TargetPreset.norm_squared
    terms: list[MonomialTerm] = []
    field: FieldKind = FieldKind.output_weighted
    coefficients: list[float] = []
    power: int = Field(default=0, ge=0)
    oracle_draws: int | None = Field(default=None, ge=1)
    oracle_seed: int = Field(default=0, ge=0)

    model_config = {"extra": "forbid"}


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """Right-hand side f, evaluated row-wise on an (n, d) batch."""

    kind: TargetKind
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    value_at_zero: float
    description: str = ""
    f_norm_upper: float | None = None

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return np.asarray(self.evaluator(X), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class RepresentedTarget:
    """f(x) = integral over the box of alpha(theta) . zeta(x; theta).

    The field is stored in density form v = |Lambda| * alpha as a function of
    the box coordinates rescaled to [-1, 1], so |f|_F <= max |v|.
    """

    cfg: ModelConfig
    field: FieldKind
    coefficients: np.ndarray  # (d,)
    power: int = 0
    oracle_draws: int = 10_000_000
    oracle_seed: int = 0

    @property
    def f_norm_upper(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coefficients)


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray   # (N, d)
    labels: np.ndarray   # (N,)
    seed: int | None = None
    stream: str | None = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]
