import logging
import time

import numpy as np

from app.core.constants import STREAM_INIT, STREAM_PROBE, STREAM_SGD, STREAM_TEST
from app.core.exceptions import BlowUpError, NonFiniteError, PinnError
from app.core.geometry import row_norms
from app.core.rng import RngStream
from app.schemas.model import ModelConfig, ModelParams
from app.schemas.problem import Dataset, TargetFunction
from app.schemas.train import BlowUpRecord, EvalRecord, TrainConfig, TrainReport
from app.services.monitor_service import build_probe_set, gap_monitor
from app.services.pinn_service import init_params, psi_and_grad_at
from app.services.problem_service import build_test_set, empirical_loss, mean_squared_residual
from app.services.threshold_service import psi_gap_envelope

logger = logging.getLogger(__name__)


# --- one step ---

def _apply_step(
    p: ModelParams, x: np.ndarray, label: float, eta: float,
) -> tuple[float, np.ndarray]:
    """W -= eta * grad L at (x, label); returns psi before the update and the gradient."""
    psi, grad_psi = psi_and_grad_at(p, x)
    grad = 2.0 * (psi - label) * grad_psi
    if not np.isfinite(psi) or not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite loss gradient")
    if eta != 0.0:
        p.W -= eta * grad
    if not np.all(np.isfinite(p.W)):
        raise NonFiniteError("non-finite hidden weights after update")
    return psi, grad


def sgd_step(p: ModelParams, data: Dataset, rng: RngStream, eta: float) -> ModelParams:
    if eta < 0:
        raise PinnError(f"learning rate must be >= 0, got {eta}")
    index = int(rng.integers(data.n))
    _apply_step(p, data.points[index], float(data.labels[index]), eta)
    return p


def blowup_check(
    p: ModelParams, psi_sample: float, cfg: TrainConfig, iteration: int = 0,
) -> BlowUpRecord | None:
    norms = row_norms(p.W)
    max_row = float(np.max(norms)) if norms.size else 0.0
    reason = None
    if not np.isfinite(max_row) or not np.isfinite(psi_sample):
        reason = "non-finite weights or output"
    elif max_row > cfg.blowup_w_max:
        reason = f"max row norm {max_row:.3e} exceeds {cfg.blowup_w_max:g}"
    elif abs(psi_sample) > cfg.blowup_psi_max:
        reason = f"|psi| {abs(psi_sample):.3e} exceeds {cfg.blowup_psi_max:g}"
    if reason is None:
        return None
    return BlowUpRecord(
        iteration=iteration, reason=reason, max_row_norm=max_row, psi_value=float(psi_sample),
    )


# --- running averages ---

def _validate_history(stamps: np.ndarray, values: np.ndarray) -> None:
    if stamps.size == 0:
        raise PinnError("empty loss history")
    if stamps.shape != values.shape:
        raise PinnError("stamps and values differ in length")
    if stamps[0] != 0 or np.any(np.diff(stamps) <= 0):
        raise PinnError("stamps must start at 0 and be strictly increasing")


def step_weighted_mean(stamps, values, horizon: int) -> float:
    """(1/T') sum_{t < T'} L(t), with L held constant from one stamp to the next."""
    stamps = np.asarray(stamps, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    _validate_history(stamps, values)
    if horizon < 1:
        raise PinnError(f"horizon must be >= 1, got {horizon}")
    ends = np.append(stamps[1:], np.iinfo(np.int64).max)
    lengths = np.clip(np.minimum(ends, horizon) - stamps, 0, None)
    return float(np.sum(values * lengths) / horizon)


def average_losses(stamps, values) -> np.ndarray:
    """Running averages at T' = t for every stamp t, and T' = 1 at the stamp t = 0.

    The value recorded at t itself enters only the averages of later stamps.
    """
    stamps = np.asarray(stamps, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    _validate_history(stamps, values)
    held = values[:-1] * np.diff(stamps)
    prefix = np.concatenate([[0.0], np.cumsum(held)])
    return np.where(stamps == 0, values, prefix / np.maximum(stamps, 1))


# --- training loop ---

def _checkpoints(T: int, eval_every: int) -> list[int]:
    stamps = list(range(0, T + 1, eval_every))
    if stamps[-1] != T:
        stamps.append(T)
    return stamps


def run_training(
    cfg: TrainConfig, model_cfg: ModelConfig, data: Dataset, f: TargetFunction,
) -> TrainReport:
    if data.n < 1:
        raise PinnError("training needs a nonempty dataset")
    started = time.perf_counter()
    eta = cfg.resolved_eta(model_cfg.m)
    p = init_params(model_cfg, RngStream(model_cfg.seed, STREAM_INIT))
    sgd_rng = RngStream(cfg.seed, STREAM_SGD)
    test = build_test_set(f, cfg.n_test, RngStream(cfg.seed, STREAM_TEST))
    probe = None
    if cfg.monitors.enabled:
        probe = build_probe_set(
            f, model_cfg.d, cfg.monitors.probe_size, RngStream(cfg.monitors.seed, STREAM_PROBE),
        )

    logger.info(
        "Training m=%d N=%d T=%d eta=%.3e eval_every=%d",
        model_cfg.m, data.n, cfg.T, eta, cfg.eval_every,
    )
    # unknown |f|_F keeps only the f-free part of the envelope
    f_norm = f.f_norm_upper or 0.0
    records: list[EvalRecord] = []
    envelope = 0.0
    max_drift = 0.0
    blowup: BlowUpRecord | None = None

    def record(t: int) -> None:
        nonlocal max_drift
        drift = float(np.max(row_norms(p.W - p.W0)))
        max_drift = max(max_drift, drift)
        rec = EvalRecord(
            t=t,
            train_loss=empirical_loss(p, data),
            expected_loss=mean_squared_residual(p, test.points, test.labels),
            max_drift=max_drift,
            drift_envelope=envelope,
        )
        if probe is not None:
            gaps = gap_monitor(p, probe.points, probe.labels, iteration=t)
            rec.psi_g_gap = gaps.psi_g_gap
            rec.psi_gap_envelope = psi_gap_envelope(
                eta, t, model_cfg.m, model_cfg.alpha, model_cfg.beta, f_norm,
            )
            rec.grad_gap = gaps.grad_gap
        logger.debug("t=%d train=%.6e expected=%.6e", t, rec.train_loss, rec.expected_loss)
        records.append(rec)

    stamps = _checkpoints(cfg.T, cfg.eval_every)
    t = 0
    try:
        record(0)
        for stamp in stamps[1:]:
            while t < stamp:
                index = int(sgd_rng.integers(data.n))
                psi, grad = _apply_step(p, data.points[index], float(data.labels[index]), eta)
                t += 1
                envelope += eta * float(np.max(row_norms(grad)))
                blowup = blowup_check(p, psi, cfg, iteration=t)
                if blowup is not None:
                    raise BlowUpError(blowup.reason, record=blowup)
            record(stamp)
    except BlowUpError as exc:
        blowup = exc.record or BlowUpRecord(
            iteration=t, reason=exc.detail, max_row_norm=float("nan"), psi_value=float("nan"),
        )
        logger.warning("Blow-up at iteration %d: %s", blowup.iteration, blowup.reason)

    if records:
        stamp_array = [r.t for r in records]
        avg_train = average_losses(stamp_array, [r.train_loss for r in records])
        avg_expected = average_losses(stamp_array, [r.expected_loss for r in records])
        for rec, tr, ex in zip(records, avg_train, avg_expected):
            rec.avg_train_loss = float(tr)
            rec.avg_expected_loss = float(ex)

    elapsed = time.perf_counter() - started
    report = TrainReport(
        model=model_cfg,
        training=cfg,
        eta=eta,
        n_train=data.n,
        records=records,
        blew_up=blowup is not None,
        blowup=blowup,
        seeds={
            "init": model_cfg.seed,
            "data": data.seed if data.seed is not None else -1,
            "sgd": cfg.seed,
            "test": cfg.seed,
        },
        wall_clock_seconds=elapsed,
        params=p,
    )
    final = report.final
    logger.info(
        "Finished m=%d N=%d in %.1fs: avg train=%.3e avg expected=%.3e%s",
        model_cfg.m, data.n, elapsed,
        final.avg_train_loss if final else float("nan"),
        final.avg_expected_loss if final else float("nan"),
        " (blew up)" if report.blew_up else "",
    )
    return report
