"""Central finite differences, used only as ground-truth oracles in checks."""

from collections.abc import Callable

import numpy as np

from app.config import settings


def fd_laplacian(
    fun: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: float | None = None,
) -> float:
    """Sum over coordinates of central second differences, O(h^2)."""
    h = settings.FD_LAPLACIAN_STEP if h is None else h
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    center = float(fun(x))
    total = 0.0
    for j in range(x.shape[0]):
        step = np.zeros_like(x)
        step[j] = h
        total += (float(fun(x + step)) - 2.0 * center + float(fun(x - step))) / (h * h)
    return total


def fd_gradient(
    fun: Callable[[np.ndarray], float],
    W: np.ndarray,
    h: float | None = None,
) -> np.ndarray:
    """Entry-wise central differences of a scalar function of a matrix."""
    h = settings.FD_GRADIENT_STEP if h is None else h
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    W = np.array(W, dtype=np.float64)
    grad = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        original = W[idx]
        W[idx] = original + h
        up = float(fun(W))
        W[idx] = original - h
        down = float(fun(W))
        W[idx] = original
        grad[idx] = (up - down) / (2.0 * h)
    return grad
