"""Closed-form constants and thresholds of the convergence and generalization analysis."""

import logging
import math

from scipy import special

from app.core.exceptions import HypothesisError
from app.schemas.theory import AdmissibleInterval, ThresholdInputs

logger = logging.getLogger(__name__)


def constants_cd(d: int) -> tuple[float, float]:
    if d < 1:
        raise HypothesisError(f"dimension must be >= 1, got {d}")
    d = float(d)
    c_d = 2.0 * d**2.5 + 4.0 * d**2 + 26.0 * d**1.5 + 12.0 * d
    c_d_prime = 4.0 * d**2.5 + 12.0 * d**2 + 60.0 * d**1.5 + 76.0 * d + 24.0 * d**0.5
    return c_d, c_d_prime


def _inverse_exponent(denominator: float, hypothesis: str) -> float:
    if denominator <= 0.0:
        raise HypothesisError(f"hypothesis {hypothesis} violated (exponent denominator {denominator:g})")
    return 1.0 / denominator


def _confidence_factor(delta: float) -> float:
    return 1.0 + math.sqrt(2.0 * math.log(1.0 / delta))


def width_threshold_M(inputs: ThresholdInputs) -> float:
    a, b, eps, fn = inputs.alpha, inputs.beta, inputs.epsilon, inputs.f_norm
    c_d, c_d_prime = constants_cd(inputs.d)
    e1 = _inverse_exponent(2 * a + 4 * b + 1, "2*alpha + 4*beta + 1 > 0")
    e2 = _inverse_exponent(a + 3 * b - 1, "alpha + 3*beta > 1")
    e3 = _inverse_exponent(2 * a + 5 * b - 1, "2*alpha + 5*beta > 1")
    e4 = _inverse_exponent(2 * a + 4 * b, "2*alpha + 4*beta > 0")
    terms = [
        ((2.0 * c_d * fn * _confidence_factor(inputs.delta)) ** 2 / eps) ** e1,
        (c_d_prime / eps) ** e2,
        (fn / eps) ** e3,
        (fn**2 / eps) ** e4,
    ]
    return max(terms)


def f_norm_constant(f_norm: float) -> float:
    """C_f = 1 / ((|f| + 1)^2 max(|f|, 1))."""
    return 1.0 / ((f_norm + 1.0) ** 2 * max(f_norm, 1.0))


def iteration_cap_terms(m: float, inputs: ThresholdInputs) -> list[float]:
    a, b, eps = inputs.alpha, inputs.beta, inputs.epsilon
    # same hypotheses as the width threshold
    _inverse_exponent(a + 3 * b - 1, "alpha + 3*beta > 1")
    return [
        m ** ((1 + 3 * a + b) / 2) / eps**0.75,
        m ** ((1 + 5 * a + 3 * b) / 3) / eps ** (2 / 3),
        m ** ((2 + 4 * a) / 3) / eps ** (2 / 3),
        m ** (2 * a + 2 * b) / eps**0.5,
        m ** (-1 + 3 * a + 5 * b) / eps,
        m ** ((2 + 5 * a + 2 * b) / 3) / eps ** (2 / 3),
        m ** ((1 + 4 * a + 3 * b) / 2) / eps**0.5,
        m ** (1 + 2 * a + b) / eps**0.5,
    ]


def iteration_cap_T0(m: float, inputs: ThresholdInputs) -> float:
    if m <= 0:
        raise HypothesisError(f"width must be positive, got {m}")
    return f_norm_constant(inputs.f_norm) * min(iteration_cap_terms(float(m), inputs))


def admissible_T(m: float, inputs: ThresholdInputs) -> AdmissibleInterval:
    interval = AdmissibleInterval(
        lower=inputs.f_norm**2 / inputs.epsilon**2, upper=iteration_cap_T0(m, inputs),
    )
    if interval.is_empty:
        logger.warning(
            "Empty admissible iteration interval at m=%g: [%.3e, %.3e]",
            m, interval.lower, interval.upper,
        )
    return interval


def sample_threshold_N0(m: float, eta: float, T: float, inputs: ThresholdInputs) -> float:
    if m <= 0 or eta <= 0 or T <= 0:
        raise HypothesisError("m, eta and T must be positive")
    a, b = inputs.alpha, inputs.beta
    scale = (m ** (-a - 2 * b) * inputs.f_norm + 1.0) ** 2 / inputs.epsilon**2
    return scale * max(math.log(1.0 / inputs.delta), eta**2 * T**2 * m ** (-4 * a))


# --- trajectory envelopes with unit constants ---

def drift_envelope(eta: float, t: float, m: float, alpha: float, beta: float, f_norm: float) -> float:
    """eta t m^-alpha (m^(-alpha-2beta) |f| + 1)."""
    return eta * t * m ** (-alpha) * (m ** (-alpha - 2 * beta) * f_norm + 1.0)


def psi_gap_envelope(eta: float, t: float, m: float, alpha: float, beta: float, f_norm: float) -> float:
    """eta^3 t^3 m^(1-4alpha) (.)^3 + eta t m^(1-2alpha-2beta) (.)."""
    factor = m ** (-alpha - 2 * beta) * f_norm + 1.0
    return (
        eta**3 * t**3 * m ** (1 - 4 * alpha) * factor**3
        + eta * t * m ** (1 - 2 * alpha - 2 * beta) * factor
    )


# --- fixed-bias fitting floor ---

def _positive_part_moment(d: int, k: int) -> float:
    """E[max(c, 0)^k] for c the first coordinate of a uniform point on S^(d-1)."""
    log_ratio = special.gammaln(d / 2) + special.gammaln((k + 1) / 2) - special.gammaln((d + k) / 2)
    return math.exp(log_ratio) / (2.0 * math.sqrt(math.pi))


def radial_fit_floor(d: int) -> float:
    """Least mean squared error of |x|^2 on the ball by networks with zero biases.

    With b = 0 every neuron's direction-averaged psi is a multiple of
    r^3 - lam r for one lam fixed by d, so the best fit of r^2 is a
    one-dimensional projection under the volume measure r^(d-1) dr.
    Trained weights that outgrow fixed biases of size m^-beta approach it.
    """
    if d < 1:
        raise HypothesisError(f"dimension must be >= 1, got {d}")
    e1 = _positive_part_moment(d, 1)
    e3 = _positive_part_moment(d, 3)
    lam = 6.0 * e1 / ((2.0 * d + 12.0) * e3 + 6.0 * e1)

    def moment(k: int) -> float:
        return 1.0 / (k + d)

    uu = moment(6) - 2.0 * lam * moment(4) + lam**2 * moment(2)
    yu = moment(5) - lam * moment(3)
    return d * (moment(4) - yu**2 / uu)
