import enum

import numpy as np

from app.core.exceptions import NonFiniteError
from app.core.rng import RngStream


class NormKind(str, enum.Enum):
    two_inf = "two_inf"
    frobenius = "frobenius"
    two_one = "two_one"


def sample_unit_ball(rng: RngStream, d: int, n: int) -> np.ndarray:
    """n points uniform by volume in the closed unit ball of R^d, shape (n, d).

    Gaussian direction times radius U^(1/d); no rejection, so every call
    consumes exactly two draws from the stream.
    """
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    direction = rng.normal((n, d))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; map it to the origin
    norms[norms == 0.0] = 1.0
    radius = rng.random((n, 1)) ** (1.0 / d)
    points = direction / norms * radius
    # rounding can push |x| a hair above 1
    overshoot = np.linalg.norm(points, axis=1) > 1.0
    if np.any(overshoot):
        shrink = 1.0 - 4.0 * np.finfo(np.float64).eps
        points[overshoot] *= shrink / np.linalg.norm(points[overshoot], axis=1, keepdims=True)
    return points


def sample_unit_sphere(rng: RngStream, d: int, n: int) -> np.ndarray:
    direction = rng.normal((n, d))
    return direction / np.linalg.norm(direction, axis=1, keepdims=True)


def row_norms(W: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(W * W, axis=1))


def matrix_norm(W: np.ndarray, kind: NormKind | str) -> float:
    """(2,p) matrix norms over rows, one row per neuron."""
    W = np.asarray(W, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("matrix norm of a non-finite weight matrix")
    kind = NormKind(kind)
    norms = row_norms(W)
    if kind is NormKind.two_inf:
        return float(norms.max(initial=0.0))
    if kind is NormKind.frobenius:
        return float(np.sqrt(np.sum(W * W)))
    return float(norms.sum())
