"""Empirical Rademacher complexity of {psi(.; W0 + W') : |W'|_{2,inf} <= tau'}.

The sign-weighted objective splits into one term per neuron, each depending
only on its own row of W', so the supremum over the row-wise ball is the sum
of per-row suprema. Each row keeps the best value seen over all restarts and
ascent iterates. Projected ascent gives a lower estimate of the supremum.
"""

import logging
import math

import numpy as np

from app.core.exceptions import PinnError
from app.core.geometry import row_norms
from app.core.rng import RngStream
from app.schemas.model import ModelParams
from app.schemas.theory import AscentConfig, RademacherResult
from app.services.pinn_service import psi_neuron_sums, psi_weight_gradient

logger = logging.getLogger(__name__)


def _project_rows(Wprime: np.ndarray, tau: float) -> np.ndarray:
    norms = row_norms(Wprime)
    scale = np.where(norms > tau, tau / np.where(norms > 0.0, norms, 1.0), 1.0)
    return Wprime * scale[:, None]


def _random_start(rng: RngStream, m: int, d: int, tau: float) -> np.ndarray:
    direction = rng.normal((m, d))
    norms = row_norms(direction)
    norms[norms == 0.0] = 1.0
    radius = tau * rng.random(m) ** (1.0 / d)
    return direction / norms[:, None] * radius[:, None]


def _row_suprema(
    p: ModelParams, X: np.ndarray, weights: np.ndarray, tau: float,
    ascent: AscentConfig, rng: RngStream,
) -> np.ndarray:
    """Best per-row value of sum_n weights[n] psi_i(x_n; w0_i + w'_i) over the ball.

    The ball is centred at the initialization W0 whatever p.W currently holds.
    """
    best = psi_neuron_sums(p.with_weights(p.W0), X, weights)
    if tau == 0.0:
        return best
    starts = [np.zeros_like(p.W0)]
    starts += [_random_start(rng.child(r), p.m, p.d, tau) for r in range(ascent.restarts)]
    for Wprime in starts:
        current = p.with_weights(p.W0 + Wprime)
        best = np.maximum(best, psi_neuron_sums(current, X, weights))
        for step in range(ascent.steps):
            grad = psi_weight_gradient(current, X, weights)
            norms = row_norms(grad)
            direction = grad / np.where(norms > 0.0, norms, 1.0)[:, None]
            Wprime = _project_rows(
                Wprime + ascent.step_size * tau / math.sqrt(1.0 + step) * direction, tau,
            )
            current = p.with_weights(p.W0 + Wprime)
            best = np.maximum(best, psi_neuron_sums(current, X, weights))
    return best


def rademacher_estimate(
    p: ModelParams,
    X: np.ndarray,
    tau_prime: float,
    n_sign_draws: int,
    rng: RngStream,
    ascent: AscentConfig | None = None,
    alpha: float = 0.0,
) -> RademacherResult:
    """Mean over sign draws of the supremum; `alpha` only enters the m^-alpha tau' / sqrt(N) form."""
    if tau_prime < 0:
        raise PinnError(f"tau' must be >= 0, got {tau_prime}")
    if n_sign_draws < 1:
        raise PinnError(f"need at least one sign draw, got {n_sign_draws}")
    ascent = ascent or AscentConfig()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]

    values = np.empty(n_sign_draws)
    for draw in range(n_sign_draws):
        draw_rng = rng.child(draw)
        weights = draw_rng.signs(n) / n
        values[draw] = float(np.sum(_row_suprema(p, X, weights, tau_prime, ascent, draw_rng)))

    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_sign_draws)) if n_sign_draws > 1 else 0.0
    bound_form = float(p.m) ** (-alpha) * tau_prime / math.sqrt(n)
    logger.info(
        "Rademacher estimate N=%d tau'=%g draws=%d: %.4e +- %.1e",
        n, tau_prime, n_sign_draws, estimate, stderr,
    )
    return RademacherResult(
        estimate=estimate,
        standard_error=stderr,
        n_points=n,
        n_sign_draws=n_sign_draws,
        tau_prime=tau_prime,
        bound_form=bound_form,
        kappa=estimate / bound_form if bound_form > 0 else None,
    )
