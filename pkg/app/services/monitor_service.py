import logging

import numpy as np
from scipy import stats

from app.core.geometry import NormKind, matrix_norm, row_norms, sample_unit_ball
from app.core.rng import RngStream
from app.schemas.model import ModelParams
from app.schemas.problem import Dataset, TargetFunction
from app.schemas.theory import GapRecord
from app.services.pinn_service import (
    loss_grad_w,
    pseudo_g_values,
    pseudo_loss_grad_w,
    psi_values,
)
from app.services.problem_service import build_test_set, empirical_loss, mean_squared_residual

logger = logging.getLogger(__name__)


def build_probe_set(f: TargetFunction, d: int, size: int, rng: RngStream) -> Dataset:
    points = sample_unit_ball(rng, d, size)
    return Dataset(points=points, labels=f(points), seed=rng.seed, stream=rng.label)


def gap_monitor(
    p: ModelParams, points: np.ndarray, labels: np.ndarray, iteration: int = 0,
) -> GapRecord:
    """Drift, max |psi - g| and max (2,1)-norm gap of the loss gradients over the probe."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.float64)
    drift = float(np.max(row_norms(p.W - p.W0)))
    psi = psi_values(p, points)
    g = pseudo_g_values(p, points)
    psi_g_gap = float(np.max(np.abs(psi - g)))

    grad_gap = 0.0
    for x, label in zip(points, labels):
        diff = loss_grad_w(p, x, float(label)) - pseudo_loss_grad_w(p, x, float(label))
        grad_gap = max(grad_gap, matrix_norm(diff, NormKind.two_one))
    return GapRecord(iteration=iteration, drift=drift, psi_g_gap=psi_g_gap, grad_gap=grad_gap)


def growth_exponent(ts, values) -> float:
    """Least-squares slope of log(value) against log(t) over strictly positive pairs."""
    ts = np.asarray(ts, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = (ts > 0) & (values > 0) & np.isfinite(values)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    fit = stats.linregress(np.log(ts[keep]), np.log(values[keep]))
    return float(fit.slope)


def ratio_series(values, envelope) -> np.ndarray:
    """measured / envelope where the envelope is positive, NaN elsewhere."""
    values = np.asarray(values, dtype=np.float64)
    envelope = np.asarray(envelope, dtype=np.float64)
    out = np.full(values.shape, np.nan)
    positive = envelope > 0
    out[positive] = values[positive] / envelope[positive]
    return out


def generalization_gap(
    p: ModelParams, data: Dataset, f: TargetFunction, n_test: int, rng: RngStream,
) -> float:
    test = build_test_set(f, n_test, rng)
    return abs(mean_squared_residual(p, test.points, test.labels) - empirical_loss(p, data))
