import csv
import io
import logging
from collections.abc import Callable
from functools import lru_cache
from pathlib import Path

import numpy as np

from app.config import settings
from app.core.constants import STREAM_ORACLE
from app.core.exceptions import ConfigError, PinnError
from app.core.geometry import sample_unit_ball
from app.core.rng import RngStream
from app.schemas.model import BasisParams, ModelConfig, ModelParams
from app.schemas.problem import (
    Dataset,
    FieldKind,
    MonomialTerm,
    RepresentedTarget,
    TargetFunction,
    TargetKind,
    TargetPreset,
    TargetSpec,
)
from app.services.export_service import atomic_write_text
from app.services.pinn_service import psi_values, zeta_coefficients

logger = logging.getLogger(__name__)


# --- Targets ---

def norm_squared_terms(d: int) -> list[MonomialTerm]:
    return [
        MonomialTerm(coefficient=1.0, exponents=[2 if j == i else 0 for j in range(d)])
        for i in range(d)
    ]


def _polynomial_evaluator(terms: list[MonomialTerm]) -> Callable[[np.ndarray], np.ndarray]:
    coefficients = np.array([t.coefficient for t in terms])
    exponents = np.array([t.exponents for t in terms], dtype=np.int64)  # (terms, d)

    def evaluate(X: np.ndarray) -> np.ndarray:
        monomials = np.prod(X[:, None, :] ** exponents[None, :, :], axis=2)
        return monomials @ coefficients

    return evaluate


def _make_polynomial(spec: TargetSpec, d: int) -> TargetFunction:
    if spec.terms:
        terms = spec.terms
    elif spec.preset is TargetPreset.norm_squared:
        terms = norm_squared_terms(d)
    else:
        raise ConfigError(["target.terms: polynomial target needs terms or a preset"])
    bad = [
        f"target.terms[{i}].exponents: expected {d} non-negative exponents"
        for i, t in enumerate(terms)
        if len(t.exponents) != d or any(e < 0 for e in t.exponents)
    ]
    if bad:
        raise ConfigError(bad)
    evaluate = _polynomial_evaluator(terms)
    value_at_zero = float(evaluate(np.zeros((1, d)))[0])
    description = " + ".join(
        f"{t.coefficient:g}*x^{tuple(t.exponents)}" for t in terms
    )
    return TargetFunction(
        kind=TargetKind.polynomial, d=d, evaluator=evaluate,
        value_at_zero=value_at_zero, description=description,
    )


def make_represented(spec: TargetSpec, cfg: ModelConfig) -> RepresentedTarget:
    coefficients = spec.coefficients or [1.0 / np.sqrt(cfg.d)] * cfg.d
    if len(coefficients) != cfg.d:
        raise ConfigError([f"target.coefficients: expected {cfg.d} values, got {len(coefficients)}"])
    return RepresentedTarget(
        cfg=cfg,
        field=spec.field,
        coefficients=np.asarray(coefficients, dtype=np.float64),
        power=spec.power,
        oracle_draws=spec.oracle_draws or settings.ORACLE_DRAWS,
        oracle_seed=spec.oracle_seed,
    )


def make_target(
    kind: TargetKind | str,
    spec: TargetSpec | None = None,
    d: int = 3,
    cfg: ModelConfig | None = None,
    fun: Callable[[np.ndarray], np.ndarray] | None = None,
) -> TargetFunction:
    kind = TargetKind(kind)
    spec = spec or TargetSpec(kind=kind)
    if kind is TargetKind.polynomial:
        return _make_polynomial(spec, d)
    if kind is TargetKind.represented:
        if cfg is None:
            raise ConfigError(["target: a represented target needs the model configuration"])
        return represented_target_function(make_represented(spec, cfg))
    if fun is None:
        raise ConfigError(["target: a custom target needs an evaluator"])
    value_at_zero = float(np.asarray(fun(np.zeros((1, d)))).reshape(-1)[0])
    return TargetFunction(
        kind=TargetKind.custom, d=d, evaluator=fun,
        value_at_zero=value_at_zero, description="custom",
    )


# --- Represented targets ---

def sample_basis(cfg: ModelConfig, rng: RngStream, k: int) -> BasisParams:
    """k i.i.d. draws uniform on the initialization box of `cfg`."""
    a0 = rng.uniform(-cfg.a_scale, cfg.a_scale, k)
    w0 = rng.uniform(-cfg.wb_scale, cfg.wb_scale, (k, cfg.d))
    b0 = rng.uniform(-cfg.wb_scale, cfg.wb_scale, k)
    return BasisParams(a0=a0, w0=w0, b0=b0)


def field_density(target: RepresentedTarget, basis: BasisParams) -> np.ndarray:
    """v(theta_i) = |Lambda| * alpha(theta_i), shape (k, d)."""
    if target.field is FieldKind.constant:
        weight = np.ones(basis.k)
    else:
        cfg = target.cfg
        weight = (basis.a0 / cfg.a_scale) * (basis.b0 / cfg.wb_scale) ** target.power
    return weight[:, None] * target.coefficients[None, :]


def field_alpha(target: RepresentedTarget, basis: BasisParams) -> np.ndarray:
    return field_density(target, basis) / target.cfg.box_volume


def represented_oracle(
    target: RepresentedTarget, X: np.ndarray, draws: int | None = None,
) -> np.ndarray:
    """Monte-Carlo value of f on every row of X, reproducible under the oracle seed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if target.is_zero:
        return np.zeros(X.shape[0])
    draws = draws or target.oracle_draws
    rng = RngStream(target.oracle_seed, STREAM_ORACLE)
    chunk = max(1, settings.ORACLE_CHUNK)
    rows = max(1, settings.EVAL_CHUNK_ELEMENTS // chunk)
    total = np.zeros(X.shape[0])
    # draw chunks are keyed by index alone, so f(x) does not depend on the batch x arrives in
    for index, start in enumerate(range(0, draws, chunk)):
        k = min(chunk, draws - start)
        basis = sample_basis(target.cfg, rng.child(index), k)
        density = field_density(target, basis)
        for row in range(0, X.shape[0], rows):
            sl = slice(row, row + rows)
            coeff = zeta_coefficients(basis, X[sl], target.cfg.d)
            total[sl] += np.sum(coeff * (X[sl] @ density.T), axis=1)
    return total / draws


def represented_target_function(target: RepresentedTarget) -> TargetFunction:
    cfg = target.cfg
    return TargetFunction(
        kind=TargetKind.represented,
        d=cfg.d,
        evaluator=lambda X: represented_oracle(target, X),
        value_at_zero=0.0,
        description=(
            f"represented field={target.field.value} power={target.power} "
            f"m={cfg.m} alpha={cfg.alpha} beta={cfg.beta}"
        ),
        f_norm_upper=target.f_norm_upper,
    )


# --- Shift for f(0) != 0 ---

def shift_rhs(
    f: TargetFunction, d: int,
) -> tuple[TargetFunction, Callable[[np.ndarray], np.ndarray]]:
    """Right-hand side for v = u + corrector, which vanishes at the origin.

    u is recovered as v - corrector; the corrector is zero on the sphere.
    """
    c = f.value_at_zero
    if c == 0.0:
        return f, lambda X: np.zeros(np.atleast_2d(X).shape[0])
    slope = 2.0 + 4.0 / d

    def shifted(X: np.ndarray) -> np.ndarray:
        rho = np.sum(X * X, axis=1)
        return f(X) + c * (slope * rho - 1.0)

    def corrector(X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        rho = np.sum(X * X, axis=1)
        return c / (2.0 * d) * rho * (rho - 1.0)

    f_tilde = TargetFunction(
        kind=f.kind, d=d, evaluator=shifted, value_at_zero=0.0,
        description=f"shifted({f.description})", f_norm_upper=None,
    )
    return f_tilde, corrector


def recover_solution(
    v_values: np.ndarray, corrector: Callable[[np.ndarray], np.ndarray], X: np.ndarray,
) -> np.ndarray:
    return np.asarray(v_values) - corrector(X)


# --- Datasets ---

def build_dataset(f: TargetFunction, n: int, d: int, rng: RngStream) -> Dataset:
    if f.value_at_zero != 0.0:
        logger.warning("Target has f(0)=%g; apply shift_rhs before theory runs", f.value_at_zero)
    points = sample_unit_ball(rng, d, n)
    labels = f(points)
    if not np.all(np.isfinite(labels)):
        raise PinnError("target produced non-finite labels")
    return Dataset(points=points, labels=labels, seed=rng.seed, stream=rng.label)


@lru_cache(maxsize=8)
def _fixed_test_set(f: TargetFunction, n_test: int, seed: int, label: str) -> Dataset:
    logger.info("Building test set n=%d seed=%d stream=%s", n_test, seed, label)
    return build_dataset(f, n_test, f.d, RngStream(seed, label))


def build_test_set(f: TargetFunction, n_test: int, rng: RngStream) -> Dataset:
    """The test set is a function of the stream key only, so repeated calls share it."""
    if n_test < 1:
        raise PinnError(f"n_test must be >= 1, got {n_test}")
    return _fixed_test_set(f, n_test, rng.seed, rng.label)


def mean_squared_residual(p: ModelParams, points: np.ndarray, labels: np.ndarray) -> float:
    residual = psi_values(p, points) - labels
    return float(np.mean(residual * residual))


def empirical_loss(p: ModelParams, data: Dataset) -> float:
    return mean_squared_residual(p, data.points, data.labels)


def expected_loss(p: ModelParams, f: TargetFunction, n_test: int, rng: RngStream) -> float:
    test = build_test_set(f, n_test, rng)
    return mean_squared_residual(p, test.points, test.labels)


# --- CSV import / export ---

def dataset_to_csv(data: Dataset) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([f"x_{j + 1}" for j in range(data.d)] + ["label"])
    for point, label in zip(data.points, data.labels):
        writer.writerow([f"{v:.17g}" for v in point] + [f"{label:.17g}"])
    return buffer.getvalue()


def write_dataset_csv(data: Dataset, path: str | Path) -> Path:
    return atomic_write_text(Path(path), dataset_to_csv(data))


def read_dataset_csv(path: str | Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise PinnError(f"{path}: missing header with trailing 'label' column")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise PinnError(f"{path}: dataset has no rows")
    table = np.array(rows, dtype=np.float64)
    return Dataset(points=table[:, :-1].copy(), labels=table[:, -1].copy())
