"""Random-feature approximation of represented targets and vector concentration."""

import logging
import math
from functools import partial

import numpy as np

from app.core.constants import (
    APPROX_MIN_TRIALS,
    CONCENTRATION_MIN_TRIALS,
    DECOUPLED_BASIS_SIZES,
    DECOUPLED_TRIALS,
    STREAM_BASIS,
)
from app.core.exceptions import ConfigError, PinnError
from app.core.geometry import NormKind, matrix_norm, sample_unit_ball, sample_unit_sphere
from app.core.rng import RngStream
from app.schemas.model import FmConstruction, ModelConfig, ModelParams
from app.schemas.problem import RepresentedTarget
from app.schemas.theory import (
    ApproxCell,
    ApproxExperimentResult,
    CertificateRecord,
    ConcentrationResult,
    DecoupledRate,
)
from app.services.monitor_service import growth_exponent
from app.services.pinn_service import basis_combination, pseudo_g_values, pseudo_gb_values
from app.services.problem_service import field_density, represented_oracle, sample_basis
from app.services.threshold_service import constants_cd

logger = logging.getLogger(__name__)

DEFAULT_EVAL_POINTS = 256
DEFAULT_EXPERIMENT_ORACLE_DRAWS = 1_000_000


def _confidence_factor(delta: float) -> float:
    return 1.0 + math.sqrt(2.0 * math.log(1.0 / delta))


def approximation_bound(target: RepresentedTarget, m: int, delta: float) -> float:
    """C_d |f|_F m^(-alpha-2beta-1/2) (1 + sqrt(2 log 1/delta))."""
    cfg = target.cfg
    c_d, _ = constants_cd(cfg.d)
    exponent = -cfg.alpha - 2.0 * cfg.beta - 0.5
    return c_d * target.f_norm_upper * float(m) ** exponent * _confidence_factor(delta)


def _retarget(target: RepresentedTarget, cfg: ModelConfig) -> RepresentedTarget:
    """The same field on another parameter box."""
    coefficients = target.coefficients
    if coefficients.shape[0] != cfg.d:
        coefficients = np.full(cfg.d, 1.0 / math.sqrt(cfg.d))
    return RepresentedTarget(
        cfg=cfg, field=target.field, coefficients=coefficients, power=target.power,
        oracle_draws=target.oracle_draws, oracle_seed=target.oracle_seed,
    )


def _same_box(a: ModelConfig, b: ModelConfig) -> bool:
    return (a.d, a.m, a.alpha, a.beta) == (b.d, b.m, b.alpha, b.beta)


def fm_construct(
    target: RepresentedTarget, cfg: ModelConfig, rng: RngStream, k: int | None = None,
) -> FmConstruction:
    """k draws theta_i uniform on the box with alpha_i = alpha(theta_i) / (k p(theta_i)).

    With p = 1/|Lambda| the coefficient reduces to v(theta_i) / k, so
    |alpha_i| <= |f|_F / k for the density bound |f|_F = max |v|.
    """
    if not _same_box(cfg, target.cfg):
        raise ConfigError(["target: represented target was built for a different parameter box"])
    k = cfg.m if k is None else k
    if k < 1:
        raise PinnError(f"basis size must be >= 1, got {k}")
    basis = sample_basis(cfg, rng, k)
    alphas = field_density(target, basis) / k
    evaluator = partial(basis_combination, basis, alphas, d=cfg.d)
    return FmConstruction(basis=basis, alphas=alphas, evaluator=evaluator)


def l2_error(values: np.ndarray, reference: np.ndarray) -> float:
    """Root mean squared difference, the L^2 norm under the sampling probability measure."""
    diff = np.asarray(values) - np.asarray(reference)
    return float(np.sqrt(np.mean(diff * diff)))


def _eval_set(
    target: RepresentedTarget, rng: RngStream, n_eval: int, oracle_draws: int,
) -> tuple[np.ndarray, np.ndarray]:
    X = sample_unit_ball(rng, target.cfg.d, n_eval)
    return X, represented_oracle(target, X, draws=oracle_draws)


def fm_approx_experiment(
    field_target: RepresentedTarget,
    widths: list[int],
    dims: list[int],
    trials: int,
    delta: float,
    rng: RngStream,
    n_eval: int = DEFAULT_EVAL_POINTS,
    oracle_draws: int = DEFAULT_EXPERIMENT_ORACLE_DRAWS,
    basis_sizes: list[int] | None = None,
    decoupled_trials: int = DECOUPLED_TRIALS,
) -> ApproxExperimentResult:
    """Coupled grid (basis size = box width m) and the decoupled k^(-1/2) rate per dimension.

    `field_target` supplies the coefficient field and alpha, beta; the target
    is rebuilt on each (d, m) box through the same field.
    """
    if trials < APPROX_MIN_TRIALS:
        raise PinnError(f"trials must be >= {APPROX_MIN_TRIALS}, got {trials}")
    if decoupled_trials < 1:
        raise PinnError(f"decoupled trials must be >= 1, got {decoupled_trials}")
    basis_sizes = basis_sizes or DECOUPLED_BASIS_SIZES
    base = field_target.cfg
    result = ApproxExperimentResult()

    for d in dims:
        for m in widths:
            cfg = ModelConfig(d=d, m=m, alpha=base.alpha, beta=base.beta, seed=base.seed)
            target = _retarget(field_target, cfg)
            X, f_vals = _eval_set(target, rng.child(f"eval/{d}/{m}"), n_eval, oracle_draws)
            bound = approximation_bound(target, m, delta)
            errors = np.empty(trials)
            for trial in range(trials):
                g = fm_construct(target, cfg, rng.child(f"{STREAM_BASIS}/{d}/{m}/{trial}"))
                errors[trial] = l2_error(g(X), f_vals)
            failures = int(np.count_nonzero(errors > bound))
            result.cells.append(ApproxCell(
                d=d, m=m, trials=trials, delta=delta, bound=bound, failures=failures,
                failure_fraction=failures / trials,
                mean_error=float(errors.mean()), max_error=float(errors.max()),
            ))
            logger.info(
                "Approximation d=%d m=%d: mean error %.3e, bound %.3e, failures %d/%d",
                d, m, errors.mean(), bound, failures, trials,
            )

        reference_m = min(widths)
        cfg = ModelConfig(d=d, m=reference_m, alpha=base.alpha, beta=base.beta, seed=base.seed)
        target = _retarget(field_target, cfg)
        X, f_vals = _eval_set(target, rng.child(f"eval/{d}/decoupled"), n_eval, oracle_draws)
        rms = []
        for k in basis_sizes:
            sq = []
            for i in range(decoupled_trials):
                g = fm_construct(target, cfg, rng.child(f"decoupled/{d}/{k}/{i}"), k=k)
                sq.append(l2_error(g(X), f_vals) ** 2)
            rms.append(float(np.sqrt(np.mean(sq))))
        slope = growth_exponent(basis_sizes, rms)
        result.decoupled.append(DecoupledRate(
            d=d, reference_m=reference_m, basis_sizes=list(basis_sizes), rms_errors=rms, slope=slope,
        ))
        logger.info("Decoupled rate d=%d: slope %.3f", d, slope)
    return result


def concentration_test(
    bound_c: float,
    k: int,
    m: int,
    delta: float,
    trials: int,
    rng: RngStream,
    point_mass_weight: float = 0.5,
) -> ConcentrationResult:
    """Mean of m draws from a radius-C sphere mixed with a point mass at C e_1.

    The mean of the family is point_mass_weight * C e_1; every draw has norm C.
    """
    if not 0.0 <= point_mass_weight <= 1.0:
        raise PinnError(f"point mass weight must lie in [0, 1], got {point_mass_weight}")
    if trials < CONCENTRATION_MIN_TRIALS:
        raise PinnError(f"trials must be >= {CONCENTRATION_MIN_TRIALS}, got {trials}")
    if m < 1 or k < 1:
        raise PinnError("m and k must be >= 1")
    atom = np.zeros(k)
    atom[0] = bound_c
    mean = point_mass_weight * atom
    bound = bound_c / math.sqrt(m) * _confidence_factor(delta)

    errors = np.empty(trials)
    batch = max(1, 2_000_000 // (m * k))
    for start in range(0, trials, batch):
        size = min(batch, trials - start)
        chunk_rng = rng.child(start)
        sphere = bound_c * sample_unit_sphere(chunk_rng, k, size * m).reshape(size, m, k)
        on_atom = chunk_rng.random((size, m)) < point_mass_weight
        draws = np.where(on_atom[:, :, None], atom, sphere)
        errors[start:start + size] = np.linalg.norm(draws.mean(axis=1) - mean, axis=1)

    failures = int(np.count_nonzero(errors > bound))
    quantiles = {f"q{int(q * 100)}": float(np.quantile(errors, q)) for q in (0.5, 0.9, 0.99)}
    return ConcentrationResult(
        bound_c=bound_c, k=k, m=m, delta=delta, trials=trials,
        point_mass_weight=point_mass_weight, failures=failures,
        failure_fraction=failures / trials, bound=bound, error_quantiles=quantiles,
    )


def pseudo_network_certificate(
    target: RepresentedTarget,
    cfg: ModelConfig,
    rng: RngStream,
    delta: float = 0.1,
    n_eval: int = DEFAULT_EVAL_POINTS,
    oracle_draws: int = DEFAULT_EXPERIMENT_ORACLE_DRAWS,
) -> CertificateRecord:
    """Plant the construction as a network: (a, W0, b) from the draws and W* the alpha rows."""
    construction = fm_construct(target, cfg, rng.child("construction"))
    basis = construction.basis
    W_star = construction.alphas
    p = ModelParams(a=basis.a0, b=basis.b0, W0=basis.w0, W=basis.w0 + W_star)
    X, f_vals = _eval_set(target, rng.child("eval"), n_eval, oracle_draws)

    gb = pseudo_gb_values(p, W_star, X)
    g = pseudo_g_values(p, X)
    _, c_d_prime = constants_cd(cfg.d)
    f_norm = target.f_norm_upper
    return CertificateRecord(
        m=cfg.m,
        d=cfg.d,
        f_norm_upper=f_norm,
        w_two_inf=matrix_norm(W_star, NormKind.two_inf),
        w_two_inf_bound=f_norm / cfg.m,
        w_frobenius=matrix_norm(W_star, NormKind.frobenius),
        w_frobenius_bound=f_norm / math.sqrt(cfg.m),
        gb_l2_error=l2_error(gb, f_vals),
        g_l2_error=l2_error(g, f_vals),
        approximation_bound=approximation_bound(target, cfg.m, delta),
        bias_gap=float(np.max(np.abs(g - gb))),
        bias_gap_bound=c_d_prime * float(cfg.m) ** (1.0 - cfg.alpha - 3.0 * cfg.beta),
    )
