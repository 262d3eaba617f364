"""The theory check suite behind the `verify` command."""

import logging
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from app.config import settings
from app.core.constants import (
    DECOUPLED_SLOPE_WINDOW,
    JSON_SCHEMA_VERSION,
    PSI_GAP_MAX_EXPONENT,
    PSI_GAP_RATIO_MAX_EXPONENT,
    RADEMACHER_RATIO_WINDOW,
    STREAM_BASIS,
    STREAM_DATA,
    STREAM_INIT,
    STREAM_SIGNS,
)
from app.core.exceptions import VerificationError
from app.core.finite_diff import fd_gradient, fd_laplacian
from app.core.geometry import sample_unit_ball, sample_unit_sphere
from app.core.rng import RngStream
from app.schemas.model import ModelConfig
from app.schemas.problem import FieldKind, TargetKind, TargetSpec
from app.schemas.run_config import RunConfig
from app.schemas.theory import AscentConfig, CheckResult, ThresholdInputs, VerifyReport
from app.schemas.train import MonitorConfig, TrainConfig
from app.services.approximation_service import (
    DEFAULT_EXPERIMENT_ORACLE_DRAWS,
    concentration_test,
    fm_approx_experiment,
    pseudo_network_certificate,
)
from app.services.export_service import write_csv, write_json
from app.services.monitor_service import growth_exponent, ratio_series
from app.services.pinn_service import (
    eval_phi,
    eval_psi,
    init_params,
    kink_margin,
    loss_grad_w,
    phi_values,
    pseudo_g_values,
    pseudo_gb_values,
    psi_values,
)
from app.services.problem_service import build_dataset, make_represented, make_target
from app.services.rademacher_service import rademacher_estimate
from app.services.threshold_service import (
    iteration_cap_T0,
    sample_threshold_N0,
    width_threshold_M,
)
from app.services.train_service import run_training

logger = logging.getLogger(__name__)


def _scaled(value: int, scale: float, floor: int) -> int:
    return max(floor, round(value * scale))


def binomial_margin(trials: int, delta: float, confidence: float = 0.99) -> float:
    """Largest failure fraction a Bernoulli(delta) count reaches at the given confidence."""
    return float(stats.binom.ppf(confidence, trials, delta)) / trials


# --- individual checks ---

def check_gradient_oracle(rng: RngStream, instances: int) -> CheckResult:
    worst = 0.0
    checked = 0
    for i in range(instances):
        sub = rng.child(i)
        p = init_params(ModelConfig(d=3, m=8, alpha=0.0, beta=0.0), sub)
        x = sample_unit_ball(sub, 3, 1)[0]
        label = float(sub.normal())
        if kink_margin(p, x) <= settings.KINK_MARGIN_FACTOR * settings.FD_GRADIENT_STEP:
            continue

        def loss(W, x=x, label=label, p=p):
            return (eval_psi(p.with_weights(W), x) - label) ** 2

        analytic = loss_grad_w(p, x, label)
        numeric = fd_gradient(loss, p.W)
        scale = max(np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
        checked += 1
    return CheckResult(
        name="gradient_oracle", passed=checked > 0 and worst < 1e-5, statistic=worst, bound=1e-5,
        detail=f"{checked} instances away from kinks",
    )


def check_laplacian_identity(rng: RngStream, instances: int) -> CheckResult:
    h = settings.FD_LAPLACIAN_STEP
    worst = 0.0
    checked = 0
    for i in range(instances):
        sub = rng.child(i)
        p = init_params(ModelConfig(d=3, m=8, alpha=0.0, beta=0.0), sub)
        x = 0.9 * sample_unit_ball(sub, 3, 1)[0]
        if kink_margin(p, x) <= settings.KINK_MARGIN_FACTOR * h:
            continue
        psi = eval_psi(p, x)
        numeric = fd_laplacian(lambda y, p=p: eval_phi(p, y), x, h)
        worst = max(worst, abs(psi - numeric) / (1.0 + abs(psi)))
        checked += 1
    return CheckResult(
        name="laplacian_identity", passed=checked > 0 and worst < 1e-4, statistic=worst, bound=1e-4,
        detail=f"{checked} instances away from kinks",
    )


def check_boundary_exactness(rng: RngStream, n: int) -> CheckResult:
    p = init_params(ModelConfig(d=3, m=64), rng.child("params"))
    X = sample_unit_sphere(rng.child("points"), 3, n)
    nonzero = int(np.count_nonzero(phi_values(p, X)))
    return CheckResult(
        name="boundary_exactness", passed=nonzero == 0, statistic=float(nonzero), bound=0.0,
        detail=f"{n} normalized boundary points",
    )


def check_linearization(rng: RngStream, n: int) -> list[CheckResult]:
    p = init_params(ModelConfig(d=3, m=64), rng.child("params"))
    X = sample_unit_ball(rng.child("points"), 3, n)
    identity_ulps = int(np.count_nonzero(pseudo_g_values(p, X) != psi_values(p, X)))

    W1 = 0.05 * rng.child("w1").normal(p.W0.shape)
    W2 = 0.05 * rng.child("w2").normal(p.W0.shape)
    shifted = p.with_weights(p.W0 + W1)
    affine = float(np.max(np.abs(
        pseudo_g_values(shifted, X) - (pseudo_gb_values(p, W1, X) + psi_values(p, X))
    )))
    c1, c2 = 0.7, -1.3
    linear = float(np.max(np.abs(
        pseudo_gb_values(p, c1 * W1 + c2 * W2, X)
        - (c1 * pseudo_gb_values(p, W1, X) + c2 * pseudo_gb_values(p, W2, X))
    )))
    return [
        CheckResult(name="pseudo_network_at_init", passed=identity_ulps == 0,
                    statistic=float(identity_ulps), bound=0.0),
        CheckResult(name="pseudo_network_affine", passed=affine <= 1e-10, statistic=affine, bound=1e-10),
        CheckResult(name="pseudo_network_linear", passed=linear <= 1e-12, statistic=linear, bound=1e-12),
    ]


def check_thresholds() -> CheckResult:
    """Monotonicity of the closed forms on a grid."""
    failures = []
    epsilons = np.linspace(0.05, 1.0, 10)
    for f_norm in (0.0, 0.5, 1.0, 4.0):
        for delta in (0.01, 0.1, 0.5):
            Ms = [width_threshold_M(ThresholdInputs(epsilon=e, delta=delta, f_norm=f_norm)) for e in epsilons]
            if np.any(np.diff(Ms) > 0):
                failures.append(f"M increases in epsilon at f={f_norm}, delta={delta}")
            inputs = ThresholdInputs(epsilon=0.1, delta=delta, f_norm=f_norm)
            caps = [iteration_cap_T0(m, inputs) for m in (2, 4, 8, 16, 32, 64, 128)]
            if np.any(np.diff(caps) <= 0):
                failures.append(f"T0 not increasing in m at f={f_norm}, delta={delta}")
            N_eps = [
                sample_threshold_N0(100, 0.01, 1e4, ThresholdInputs(epsilon=e, delta=delta, f_norm=f_norm))
                for e in epsilons
            ]
            if np.any(np.diff(N_eps) > 0):
                failures.append(f"N0 increases in epsilon at f={f_norm}, delta={delta}")
            N_T = [sample_threshold_N0(100, 0.01, T, inputs) for T in (1e2, 1e3, 1e4, 1e5)]
            if np.any(np.diff(N_T) < 0):
                failures.append(f"N0 decreases in T at f={f_norm}, delta={delta}")
    return CheckResult(
        name="threshold_monotonicity", passed=not failures, statistic=float(len(failures)), bound=0.0,
        detail="; ".join(failures),
    )


def check_trajectory(seed: int, T: int) -> list[CheckResult]:
    model_cfg = ModelConfig(d=3, m=256, seed=seed)
    f = make_target(TargetKind.polynomial, d=3)
    data = build_dataset(f, 100, 3, RngStream(seed, STREAM_DATA))
    eval_every = max(1, T // 20)
    cfg = TrainConfig(
        T=T, eval_every=eval_every, n_test=settings.SCALE_N_TEST_FLOOR, seed=seed,
        monitors=MonitorConfig(enabled=True, seed=seed),
    )
    report = run_training(cfg, model_cfg, data, f)
    slack = 1e-12
    within = all(r.max_drift <= r.drift_envelope * (1.0 + 1e-9) + slack for r in report.records)
    ts = [r.t for r in report.records]
    gaps = [r.psi_g_gap for r in report.records]
    exponent = growth_exponent(ts, gaps)
    ratios = ratio_series(gaps, [r.psi_gap_envelope for r in report.records])
    ratio_exponent = growth_exponent(ts, ratios)
    bounded = bool(np.all(np.isfinite(ratios[1:]))) and ratio_exponent <= PSI_GAP_RATIO_MAX_EXPONENT
    return [
        CheckResult(name="drift_within_step_envelope", passed=within and not report.blew_up,
                    detail=f"{len(report.records)} checkpoints"),
        CheckResult(
            name="psi_gap_growth_exponent",
            passed=bool(np.isfinite(exponent)) and exponent <= PSI_GAP_MAX_EXPONENT,
            statistic=exponent, bound=PSI_GAP_MAX_EXPONENT,
        ),
        CheckResult(
            name="psi_gap_envelope_ratio", passed=bounded, statistic=ratio_exponent,
            bound=PSI_GAP_RATIO_MAX_EXPONENT,
            detail=f"max ratio {np.nanmax(ratios):.3e} over {len(ratios) - 1} checkpoints",
        ),
    ]


def check_approximation(
    seed: int, trials: int, delta: float, oracle_draws: int = DEFAULT_EXPERIMENT_ORACLE_DRAWS,
) -> list[CheckResult]:
    spec = TargetSpec(kind=TargetKind.represented, field=FieldKind.output_weighted, power=1)
    base = make_represented(spec, ModelConfig(d=3, m=64, seed=seed))
    result = fm_approx_experiment(
        base, widths=[64, 256, 1024], dims=[1, 3], trials=trials, delta=delta,
        rng=RngStream(seed, STREAM_BASIS), oracle_draws=oracle_draws,
    )
    limit = binomial_margin(trials, delta)
    checks = [
        CheckResult(
            name=f"approximation_bound_d{c.d}_m{c.m}", passed=c.failure_fraction <= limit,
            statistic=c.failure_fraction, bound=limit,
        )
        for c in result.cells
    ]
    low, high = DECOUPLED_SLOPE_WINDOW
    checks += [
        CheckResult(
            name=f"decoupled_rate_d{rate.d}", passed=low <= rate.slope <= high,
            statistic=rate.slope, bound=high, detail=f"window [{low}, {high}]",
        )
        for rate in result.decoupled
    ]
    certificate = pseudo_network_certificate(base, base.cfg, RngStream(seed, "certificate"), delta=delta,
        oracle_draws=oracle_draws,
    )
    checks.append(CheckResult(
        name="pseudo_network_certificate",
        passed=(
            certificate.w_two_inf <= certificate.w_two_inf_bound * (1.0 + 1e-12)
            and certificate.bias_gap <= certificate.bias_gap_bound
            and certificate.gb_l2_error <= certificate.approximation_bound
        ),
        statistic=certificate.gb_l2_error, bound=certificate.approximation_bound,
    ))
    return checks


def check_concentration(seed: int, trials: int) -> list[CheckResult]:
    checks = []
    for delta in (0.05, 0.2):
        result = concentration_test(
            bound_c=1.0, k=8, m=400, delta=delta, trials=trials,
            rng=RngStream(seed, f"concentration/{delta}"),
        )
        limit = binomial_margin(trials, delta)
        checks.append(CheckResult(
            name=f"concentration_delta{delta}", passed=result.failure_fraction <= limit,
            statistic=result.failure_fraction, bound=limit,
        ))
    return checks


def check_rademacher(seed: int, n_points: int, sign_draws: int, ascent: AscentConfig) -> list[CheckResult]:
    p = init_params(ModelConfig(d=3, m=256, seed=seed), RngStream(seed, STREAM_INIT))
    points = sample_unit_ball(RngStream(seed, "rademacher_points"), 3, 4 * n_points)
    small = rademacher_estimate(
        p, points[:n_points], 0.05, sign_draws, RngStream(seed, STREAM_SIGNS), ascent,
    )
    large = rademacher_estimate(p, points, 0.05, sign_draws, RngStream(seed, STREAM_SIGNS), ascent)
    ratio = small.estimate / large.estimate if large.estimate > 0 else float("inf")
    zero = rademacher_estimate(p, points[:n_points], 0.0, sign_draws, RngStream(seed, STREAM_SIGNS))
    zero_bound = 3.0 / np.sqrt(sign_draws * n_points)
    low, high = RADEMACHER_RATIO_WINDOW
    return [
        CheckResult(name="rademacher_ratio", passed=low <= ratio <= high, statistic=ratio, bound=high,
                    detail=f"window [{low}, {high}], N={n_points} vs {4 * n_points}"),
        CheckResult(name="rademacher_zero_radius", passed=abs(zero.estimate) <= zero_bound,
                    statistic=abs(zero.estimate), bound=zero_bound),
    ]


# --- suite ---

def run_verify(cfg: RunConfig, scale: float = 1.0) -> VerifyReport:
    seed = cfg.model.seed
    rng = RngStream(seed, "verify")
    report = VerifyReport()
    report.checks.append(check_gradient_oracle(rng.child("gradient"), _scaled(1000, scale, 50)))
    report.checks.append(check_laplacian_identity(rng.child("laplacian"), _scaled(1000, scale, 50)))
    report.checks.append(check_boundary_exactness(rng.child("boundary"), 10_000))
    report.checks.extend(check_linearization(rng.child("linearization"), 10_000))
    report.checks.append(check_thresholds())
    report.checks.extend(check_trajectory(seed, _scaled(10_000, scale, 1000)))
    report.checks.extend(check_approximation(seed, _scaled(500, scale, 100), 0.1))
    report.checks.extend(check_concentration(seed, _scaled(5000, scale, 1000)))
    ascent = AscentConfig(
        restarts=_scaled(settings.RADEMACHER_RESTARTS, scale, 1),
        steps=_scaled(settings.RADEMACHER_STEPS, scale, 20),
    )
    report.checks.extend(check_rademacher(seed, _scaled(500, scale, 100), _scaled(200, scale, 50), ascent))

    out = Path(cfg.output.directory)
    write_csv(
        out / "verify.csv", "verify", ["check", "statistic", "bound", "pass"],
        [[c.name, c.statistic, c.bound, c.passed] for c in report.checks],
    )
    payload: dict[str, Any] = {
        "schema_version": JSON_SCHEMA_VERSION,
        "passed": report.passed,
        "checks": [c.model_dump(mode="json") for c in report.checks],
    }
    write_json(out / "verify.json", payload)

    for c in report.checks:
        logger.info("%-5s %s statistic=%s bound=%s %s",
                    "PASS" if c.passed else "FAIL", c.name, c.statistic, c.bound, c.detail)
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        raise VerificationError(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    return report
