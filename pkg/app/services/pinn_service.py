"""Ansatz phi, network psi = Laplacian(phi), random basis zeta and the pseudo networks.

All batched kernels share one per-neuron template

    a_i * (2d * s_lin * (s0 * s0) + 12 * s_lin * (u0 * s0) + 6 * s_lin * (q0 * r)) * 1[s0 >= 0]

with s = w.x + b, u = w.x, q = w.w and r = |x|^2 - 1. psi plugs the current
weights into every slot; g keeps s0, u0, q0 and the indicator at W0 and puts the
current weights in s_lin; g^(b) drops the bias from s_lin. Sharing the template
fixes the arithmetic order, so g(.; W0) and psi(.; W0) agree to the last bit.
"""

import logging

import numpy as np

from app.config import settings
from app.core.exceptions import NonFiniteError
from app.core.rng import RngStream
from app.schemas.model import BasisParam, BasisParams, ModelConfig, ModelParams

logger = logging.getLogger(__name__)

# |x|^2 - 1 within this many ulps of zero is treated as the sphere itself
BOUNDARY_TOL: float = 8.0 * np.finfo(np.float64).eps


def init_params(cfg: ModelConfig, rng: RngStream) -> ModelParams:
    a = rng.uniform(-cfg.a_scale, cfg.a_scale, cfg.m)
    W0 = rng.uniform(-cfg.wb_scale, cfg.wb_scale, (cfg.m, cfg.d))
    b = rng.uniform(-cfg.wb_scale, cfg.wb_scale, cfg.m)
    logger.debug("Initialized m=%d d=%d alpha=%s beta=%s", cfg.m, cfg.d, cfg.alpha, cfg.beta)
    return ModelParams(a=a, b=b, W0=W0, W=W0.copy())


def boundary_factor(X: np.ndarray) -> np.ndarray:
    r = np.sum(X * X, axis=1) - 1.0
    r[np.abs(r) <= BOUNDARY_TOL] = 0.0
    return r


def _as_batch(x: np.ndarray) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


def _chunks(n: int, m: int):
    rows = max(1, settings.EVAL_CHUNK_ELEMENTS // max(m, 1))
    for start in range(0, n, rows):
        yield slice(start, min(start + rows, n))


def _neuron_template(
    a: np.ndarray,
    s_lin: np.ndarray,
    s0: np.ndarray,
    u0: np.ndarray,
    q0: np.ndarray,
    r: np.ndarray,
    d: int,
) -> np.ndarray:
    rc = r[:, None]
    terms = 2.0 * d * s_lin * (s0 * s0) + 12.0 * s_lin * (u0 * s0) + 6.0 * s_lin * (q0 * rc)
    return np.sum(np.where(s0 >= 0.0, a * terms, 0.0), axis=1)


def _check_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite {what}")
    return values


# --- phi and psi ---

def phi_values(p: ModelParams, X: np.ndarray) -> np.ndarray:
    X = _as_batch(X)
    out = np.empty(X.shape[0])
    for sl in _chunks(X.shape[0], p.m):
        s = X[sl] @ p.W.T + p.b
        hidden = np.sum(p.a * np.maximum(s, 0.0) ** 3, axis=1)
        out[sl] = boundary_factor(X[sl]) * hidden
    return out


def eval_phi(p: ModelParams, x: np.ndarray) -> float:
    return float(phi_values(p, x)[0])


def psi_values(p: ModelParams, X: np.ndarray) -> np.ndarray:
    X = _as_batch(X)
    q = np.sum(p.W * p.W, axis=1)
    out = np.empty(X.shape[0])
    for sl in _chunks(X.shape[0], p.m):
        u = X[sl] @ p.W.T
        s = u + p.b
        out[sl] = _neuron_template(p.a, s, s, u, q, boundary_factor(X[sl]), p.d)
    return _check_finite(out, "network output psi")


def eval_psi(p: ModelParams, x: np.ndarray) -> float:
    return float(psi_values(p, x)[0])


def psi_neuron_sums(p: ModelParams, X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-neuron contributions to sum_n weights[n] * psi(x_n), shape (m,)."""
    X = _as_batch(X)
    weights = np.asarray(weights, dtype=np.float64)
    q = np.sum(p.W * p.W, axis=1)
    out = np.zeros(p.m)
    for sl in _chunks(X.shape[0], p.m):
        u = X[sl] @ p.W.T
        s = u + p.b
        r = boundary_factor(X[sl])[:, None]
        terms = 2.0 * p.d * s * (s * s) + 12.0 * s * (u * s) + 6.0 * s * (q * r)
        out += weights[sl] @ np.where(s >= 0.0, p.a * terms, 0.0)
    return out


# --- pseudo networks ---

def pseudo_g_values(p: ModelParams, X: np.ndarray) -> np.ndarray:
    X = _as_batch(X)
    q0 = np.sum(p.W0 * p.W0, axis=1)
    out = np.empty(X.shape[0])
    for sl in _chunks(X.shape[0], p.m):
        u0 = X[sl] @ p.W0.T
        s0 = u0 + p.b
        s_lin = X[sl] @ p.W.T + p.b
        out[sl] = _neuron_template(p.a, s_lin, s0, u0, q0, boundary_factor(X[sl]), p.d)
    return out


def eval_pseudo_g(p: ModelParams, x: np.ndarray) -> float:
    return float(pseudo_g_values(p, x)[0])


def pseudo_gb_values(p: ModelParams, Wprime: np.ndarray, X: np.ndarray) -> np.ndarray:
    X = _as_batch(X)
    q0 = np.sum(p.W0 * p.W0, axis=1)
    out = np.empty(X.shape[0])
    for sl in _chunks(X.shape[0], p.m):
        u0 = X[sl] @ p.W0.T
        s0 = u0 + p.b
        s_lin = X[sl] @ Wprime.T
        out[sl] = _neuron_template(p.a, s_lin, s0, u0, q0, boundary_factor(X[sl]), p.d)
    return out


def eval_pseudo_gb(p: ModelParams, Wprime: np.ndarray, x: np.ndarray) -> float:
    return float(pseudo_gb_values(p, np.asarray(Wprime, dtype=np.float64), x)[0])


# --- random basis ---

def zeta_coefficients(basis: BasisParams, X: np.ndarray, d: int) -> np.ndarray:
    """c[n, i] with zeta(x_n; theta_i) = c[n, i] * x_n."""
    X = _as_batch(X)
    u0 = X @ basis.w0.T
    s0 = u0 + basis.b0
    q0 = np.sum(basis.w0 * basis.w0, axis=1)
    r = boundary_factor(X)[:, None]
    inner = 2.0 * d * (s0 * s0) + 12.0 * (u0 * s0) + 6.0 * (q0 * r)
    return np.where(s0 >= 0.0, basis.a0 * inner, 0.0)


def eval_zeta(theta: BasisParam, x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    basis = BasisParams(
        a0=np.array([theta.a0]), w0=np.asarray(theta.w0, dtype=np.float64)[None, :],
        b0=np.array([theta.b0]),
    )
    return zeta_coefficients(basis, x, cfg.d)[0, 0] * x


def basis_combination(basis: BasisParams, alphas: np.ndarray, X: np.ndarray, d: int) -> np.ndarray:
    """sum_i alpha_i . zeta(x; theta_i) for every row of X."""
    X = _as_batch(X)
    out = np.empty(X.shape[0])
    for sl in _chunks(X.shape[0], basis.k):
        coeff = zeta_coefficients(basis, X[sl], d)
        out[sl] = np.sum(coeff * (X[sl] @ alphas.T), axis=1)
    return out


# --- gradients ---

def psi_weight_gradient(p: ModelParams, X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_n weights[n] * grad_W psi(x_n), shape (m, d)."""
    X = _as_batch(X)
    weights = np.asarray(weights, dtype=np.float64)
    q = np.sum(p.W * p.W, axis=1)
    coef_x_total = np.zeros((p.m, p.d))
    coef_w_total = np.zeros(p.m)
    for sl in _chunks(X.shape[0], p.m):
        u = X[sl] @ p.W.T
        s = u + p.b
        r = boundary_factor(X[sl])[:, None]
        active = s >= 0.0
        coef_x = (6.0 * p.d + 12.0) * (s * s) + 24.0 * (s * u) + 6.0 * (q * r)
        coef_w = 12.0 * (s * r)
        scale = np.where(active, p.a, 0.0) * weights[sl, None]
        coef_x_total += (coef_x * scale).T @ X[sl]
        coef_w_total += np.sum(coef_w * scale, axis=0)
    return coef_x_total + coef_w_total[:, None] * p.W


def grad_psi_w(p: ModelParams, x: np.ndarray) -> np.ndarray:
    return psi_weight_gradient(p, x, np.ones(1))


def grad_pseudo_g_w(p: ModelParams, x: np.ndarray) -> np.ndarray:
    """g is affine in W: row i of the gradient is c_i * x with c_i read off at W0."""
    x = np.asarray(x, dtype=np.float64)
    u0 = p.W0 @ x
    s0 = u0 + p.b
    q0 = np.sum(p.W0 * p.W0, axis=1)
    r = boundary_factor(x[None, :])[0]
    coef = 2.0 * p.d * (s0 * s0) + 12.0 * (u0 * s0) + 6.0 * (q0 * r)
    coef = np.where(s0 >= 0.0, p.a * coef, 0.0)
    return coef[:, None] * x[None, :]


def psi_and_grad_at(p: ModelParams, x: np.ndarray) -> tuple[float, np.ndarray]:
    """psi(x) and grad_W psi(x) for one point, sharing the per-neuron factors."""
    X = _as_batch(x)
    x = X[0]
    q = np.sum(p.W * p.W, axis=1)
    r_row = boundary_factor(X)
    u_row = X @ p.W.T
    s_row = u_row + p.b
    # same kernel as psi_values, so psi here is bit-identical to eval_psi
    psi = float(_neuron_template(p.a, s_row, s_row, u_row, q, r_row, p.d)[0])
    u, s, r = u_row[0], s_row[0], r_row[0]
    active = s >= 0.0
    scale = np.where(active, p.a, 0.0)
    coef_x = ((6.0 * p.d + 12.0) * (s * s) + 24.0 * (s * u) + 6.0 * (q * r)) * scale
    coef_w = 12.0 * (s * r) * scale
    grad = coef_x[:, None] * x[None, :] + coef_w[:, None] * p.W
    return psi, grad


def loss_grad_w(p: ModelParams, x: np.ndarray, label: float) -> np.ndarray:
    psi, grad_psi = psi_and_grad_at(p, x)
    grad = 2.0 * (psi - label) * grad_psi
    return _check_finite(grad, "loss gradient")


def pseudo_loss_grad_w(p: ModelParams, x: np.ndarray, label: float) -> np.ndarray:
    residual = eval_pseudo_g(p, x) - label
    return 2.0 * residual * grad_pseudo_g_w(p, x)


def kink_margin(p: ModelParams, x: np.ndarray) -> float:
    """min_i |w_i.x + b_i|, the distance of x from every indicator switch."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.min(np.abs(p.W @ x + p.b)))
