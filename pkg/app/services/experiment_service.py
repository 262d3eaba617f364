"""Run configuration loading and the train / table1 / fig1 / approx orchestrations."""

import logging
import statistics
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app.config import settings
from app.core.constants import (
    JSON_SCHEMA_VERSION,
    LOSS_CURVE_COLUMNS,
    STREAM_BASIS,
    STREAM_DATA,
    TABLE1_ALPHA,
    TABLE1_BETA,
    TABLE1_DIMENSION,
    TABLE1_ITERATIONS,
    TABLE1_SAMPLE_SIZES,
    TABLE1_WIDTHS,
    TRAIN_LOSS_BAND,
    TRAIN_LOSS_ROW_SPREAD,
)
from app.core.exceptions import BlowUpError, ConfigError, VerificationError
from app.core.rng import RngStream
from app.schemas.model import ModelConfig
from app.schemas.problem import TargetFunction, TargetKind, TargetPreset
from app.schemas.run_config import Preset, RunConfig
from app.schemas.theory import CheckResult
from app.schemas.train import TrainReport
from app.services.approximation_service import fm_approx_experiment
from app.services.export_service import render_svg_loss_plot, write_csv, write_json, write_svg
from app.services.problem_service import build_dataset, make_represented, make_target, shift_rhs
from app.services.threshold_service import radial_fit_floor
from app.services.train_service import run_training

logger = logging.getLogger(__name__)

TABLE1_PRESET: dict[str, Any] = {
    "model": {"d": TABLE1_DIMENSION, "alpha": TABLE1_ALPHA, "beta": TABLE1_BETA},
    "target": {"kind": "polynomial", "preset": "norm_squared"},
    "training": {"T": TABLE1_ITERATIONS},
    "grid": {"widths": list(TABLE1_WIDTHS), "sample_sizes": list(TABLE1_SAMPLE_SIZES)},
}


# --- configuration ---

def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _violations(exc: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
        for err in exc.errors()
    ]


def parse_config(text: str) -> RunConfig:
    """Validate a TOML run document; every violation is reported at once."""
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"<document>: {exc}"]) from exc
    preset = document.get("experiment", {}).get("preset")
    if preset == Preset.table1.value:
        document = _deep_merge(TABLE1_PRESET, document)
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(_violations(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    return parse_config(text)


def _revalidate(cfg: RunConfig) -> RunConfig:
    """Schema validation for a config rebuilt with model_copy."""
    try:
        return RunConfig.model_validate(cfg.model_dump())
    except ValidationError as exc:
        raise ConfigError(_violations(exc)) from exc


def apply_overrides(
    cfg: RunConfig, seed: int | None = None, out: str | None = None,
) -> RunConfig:
    update: dict[str, Any] = {}
    if seed is not None:
        update["model"] = cfg.model.model_copy(update={"seed": seed})
        update["dataset"] = cfg.dataset.model_copy(update={"seed": seed})
        update["training"] = cfg.training.model_copy(update={"seed": seed})
        update["grid"] = cfg.grid.model_copy(update={"seeds": [seed]})
    if out is not None:
        update["output"] = cfg.output.model_copy(update={"directory": out})
    return _revalidate(cfg.model_copy(update=update))


def override_iterations(cfg: RunConfig, T: int) -> RunConfig:
    """New horizon T; the evaluation stride shrinks to fit inside it."""
    training = cfg.training.model_copy(
        update={"T": T, "eval_every": min(cfg.training.eval_every, max(T, 1))},
    )
    return _revalidate(cfg.model_copy(update={"training": training}))


def apply_scale(cfg: RunConfig, scale: float) -> RunConfig:
    """Desk-scale run: shrink T and n_test, cap every width at SCALE_WIDTH_CAP."""
    if not 0.0 < scale <= 1.0:
        raise ConfigError([f"--scale: expected a value in (0, 1], got {scale}"])
    if scale == 1.0:
        return cfg
    training = cfg.training
    T = max(1, round(training.T * scale)) if training.T > 0 else 0
    eval_every = max(1, min(round(training.eval_every * scale), T or 1))
    floor = settings.SCALE_N_TEST_FLOOR
    n_test = min(training.n_test, max(floor, round(training.n_test * scale)))
    cap = settings.SCALE_WIDTH_CAP
    return _revalidate(cfg.model_copy(update={
        "model": cfg.model.model_copy(update={"m": min(cfg.model.m, cap)}),
        "training": training.model_copy(update={"T": T, "eval_every": eval_every, "n_test": n_test}),
        "grid": cfg.grid.model_copy(update={"widths": [min(m, cap) for m in cfg.grid.widths]}),
    }))


# --- single runs ---

def build_target(cfg: RunConfig, model_cfg: ModelConfig) -> TargetFunction:
    """Target for the run, shifted so that f(0) = 0 when needed."""
    kind = cfg.target.kind
    if kind is TargetKind.represented:
        f = make_target(kind, cfg.target, d=model_cfg.d, cfg=model_cfg)
    else:
        f = make_target(kind, cfg.target, d=model_cfg.d)
    if f.value_at_zero != 0.0:
        logger.info("Target has f(0)=%g; training on the shifted right-hand side", f.value_at_zero)
        f, _ = shift_rhs(f, model_cfg.d)
    return f


def train_once(cfg: RunConfig, m: int | None = None, n: int | None = None, seed: int | None = None) -> TrainReport:
    model_cfg = cfg.model
    if m is not None:
        model_cfg = model_cfg.model_copy(update={"m": m})
    if seed is not None:
        model_cfg = model_cfg.model_copy(update={"seed": seed})
    training = cfg.train_config()
    if seed is not None:
        training = training.model_copy(update={"seed": seed})
    data_seed = cfg.dataset.seed if seed is None else seed
    f = build_target(cfg, model_cfg)
    data = build_dataset(f, n or cfg.dataset.n, model_cfg.d, RngStream(data_seed, STREAM_DATA))
    return run_training(training, model_cfg, data, f)


def curve_rows(report: TrainReport) -> list[list[Any]]:
    return [
        [r.t, r.train_loss, r.avg_train_loss, r.expected_loss, r.avg_expected_loss, r.max_drift]
        for r in report.records
    ]


def summary_payload(report: TrainReport, include_timings: bool) -> dict[str, Any]:
    final = report.final
    payload: dict[str, Any] = {
        "schema_version": JSON_SCHEMA_VERSION,
        "app": settings.APP_NAME,
        "config": {
            "model": report.model.model_dump(mode="json"),
            "training": report.training.model_dump(mode="json"),
            "eta": report.eta,
            "n_train": report.n_train,
        },
        "metrics": final.model_dump(mode="json") if final else {},
        "blew_up": report.blew_up,
        "blowup": report.blowup.model_dump(mode="json") if report.blowup else None,
        "seeds": report.seeds,
    }
    if include_timings:
        payload["timings"] = {"wall_clock_seconds": report.wall_clock_seconds}
    return payload


def run_train(cfg: RunConfig, timings: bool = False) -> TrainReport:
    out = Path(cfg.output.directory)
    report = train_once(cfg)
    write_csv(out / "loss_curve.csv", "loss_curve", LOSS_CURVE_COLUMNS, curve_rows(report))
    write_json(out / "summary.json", summary_payload(report, timings))
    xs = [r.t for r in report.records]
    svg = render_svg_loss_plot(
        {
            "train": (xs, [r.avg_train_loss for r in report.records]),
            "expected": (xs, [r.avg_expected_loss for r in report.records]),
        },
        title=f"m={report.model.m}, N={report.n_train}",
    )
    write_svg(out / "loss_curve.svg", svg)
    if report.blew_up:
        raise BlowUpError(f"training blew up: {report.blowup.reason}", record=report.blowup)
    return report


# --- grids ---

def _grid_cell(job: tuple[RunConfig, int, int, int]) -> dict[str, Any]:
    """Worker entry point; builds everything from the picklable config."""
    cfg, m, n, seed = job
    report = train_once(cfg, m=m, n=n, seed=seed)
    final = report.final
    return {
        "m": m,
        "N": n,
        "seed": seed,
        "avg_train_loss": final.avg_train_loss if final else float("nan"),
        "avg_expected_loss": final.avg_expected_loss if final else float("nan"),
        "blew_up": report.blew_up,
        "wall_clock_seconds": report.wall_clock_seconds,
        "curve": [(r.t, r.avg_train_loss) for r in report.records],
    }


def run_grid(jobs: list[tuple[RunConfig, int, int, int]], workers: int | None = None) -> list[dict[str, Any]]:
    """Results come back in job order whatever the worker count."""
    workers = workers or settings.MAX_WORKERS
    logger.info("Running %d grid cells on %d worker(s)", len(jobs), workers)
    if workers <= 1:
        return [_grid_cell(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_grid_cell, jobs))


def _grid_jobs(cfg: RunConfig, seeds: list[int]) -> list[tuple[RunConfig, int, int, int]]:
    """One job per distinct (m, N, seed); capped widths can repeat in the grid."""
    return [
        (cfg, m, n, seed)
        for m in dict.fromkeys(cfg.grid.widths)
        for n in dict.fromkeys(cfg.grid.sample_sizes)
        for seed in dict.fromkeys(seeds)
    ]


def _fits_norm_squared(cfg: RunConfig) -> bool:
    target = cfg.target
    return (
        target.kind is TargetKind.polynomial and not target.terms
        and target.preset is TargetPreset.norm_squared
    )


def table1_checks(table: list[dict[str, Any]], floor: float | None = None) -> list[CheckResult]:
    """Training-loss band per cell, then per width the gap trend and the one-decade row spread."""
    low, high = TRAIN_LOSS_BAND
    checks = []
    for row in table:
        detail = f"band [{low:g}, {high:g}]"
        if floor is not None:
            detail += f", fixed-bias radial floor {floor:.3e}"
        checks.append(CheckResult(
            name=f"train_loss_band_m{row['m_nominal']}_N{row['N']}",
            passed=low <= row["avg_train_loss"] <= high and not row["blew_up"],
            statistic=row["avg_train_loss"], bound=high, detail=detail,
        ))

    for nominal in dict.fromkeys(row["m_nominal"] for row in table):
        cells = sorted((row for row in table if row["m_nominal"] == nominal), key=lambda row: row["N"])
        if len({row["N"] for row in cells}) < 2:
            continue
        first, last = cells[0], cells[-1]
        checks.append(CheckResult(
            name=f"gap_shrinks_m{nominal}",
            passed=last["gap"] < first["gap"],
            statistic=last["gap"], bound=first["gap"],
            detail=f"N={last['N']} against N={first['N']}",
        ))
        losses = [row["avg_train_loss"] for row in cells]
        spread = max(losses) / min(losses) if min(losses) > 0 else float("inf")
        checks.append(CheckResult(
            name=f"train_loss_row_m{nominal}",
            passed=spread <= TRAIN_LOSS_ROW_SPREAD,
            statistic=spread, bound=TRAIN_LOSS_ROW_SPREAD, detail="max / min over N",
        ))
    return checks


def run_table1(
    cfg: RunConfig, nominal_widths: list[int], workers: int | None = None, timings: bool = False,
) -> list[dict[str, Any]]:
    out = Path(cfg.output.directory)
    results = run_grid(_grid_jobs(cfg, cfg.grid.seeds), workers)

    cell_rows = [
        [r["m"], r["N"], r["seed"], r["avg_train_loss"], r["avg_expected_loss"], r["blew_up"]]
        for r in results
    ]
    write_csv(
        out / "table1_cells.csv", "table1_cells",
        ["m", "N", "seed", "avg_train_loss", "avg_expected_loss", "blew_up"], cell_rows,
    )

    low, high = TRAIN_LOSS_BAND
    table = []
    for nominal, m in zip(nominal_widths, cfg.grid.widths):
        for n in cfg.grid.sample_sizes:
            cell = [r for r in results if r["m"] == m and r["N"] == n]
            train = statistics.median(r["avg_train_loss"] for r in cell)
            expected = statistics.median(r["avg_expected_loss"] for r in cell)
            table.append({
                "m_nominal": nominal, "m": m, "N": n, "seeds": len(cell),
                "avg_train_loss": train, "avg_expected_loss": expected,
                "gap": abs(expected - train),
                "in_band": low <= train <= high,
                "blew_up": any(r["blew_up"] for r in cell),
            })
    columns = [
        "m_nominal", "m", "N", "seeds", "avg_train_loss", "avg_expected_loss", "gap", "in_band", "blew_up",
    ]
    write_csv(out / "table1.csv", "table1", columns, [[row[c] for c in columns] for row in table])

    floor = radial_fit_floor(cfg.model.d) if _fits_norm_squared(cfg) else None
    checks = table1_checks(table, floor)
    write_csv(
        out / "table1_checks.csv", "table1_checks", ["check", "statistic", "bound", "pass"],
        [[c.name, c.statistic, c.bound, c.passed] for c in checks],
    )

    payload: dict[str, Any] = {
        "schema_version": JSON_SCHEMA_VERSION,
        "app": settings.APP_NAME,
        "config": cfg.model_dump(mode="json"),
        "cells": table,
        "checks": [c.model_dump(mode="json") for c in checks],
    }
    if timings:
        payload["timings"] = {
            f"m={r['m']},N={r['N']},seed={r['seed']}": r["wall_clock_seconds"] for r in results
        }
    write_json(out / "table1.json", payload)

    for n in cfg.grid.sample_sizes:
        logger.info(
            "N=%-6d %s", n,
            "  ".join(
                f"{row['avg_train_loss']:.2e} / {row['avg_expected_loss']:.2e}"
                for row in table if row["N"] == n
            ),
        )
    for c in checks:
        logger.info("%-5s %s statistic=%s bound=%s %s",
                    "PASS" if c.passed else "FAIL", c.name, c.statistic, c.bound, c.detail)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise VerificationError(f"{len(failed)} table check(s) failed: {', '.join(failed)}")
    return table


def run_fig1(cfg: RunConfig, workers: int | None = None) -> None:
    """One plot per sample size N with one average-training-loss curve per width m."""
    out = Path(cfg.output.directory)
    seed = cfg.grid.seeds[0]
    results = run_grid(_grid_jobs(cfg, [seed]), workers)
    for n in cfg.grid.sample_sizes:
        series = {}
        rows = []
        for r in results:
            if r["N"] != n:
                continue
            xs = [t for t, _ in r["curve"]]
            ys = [v for _, v in r["curve"]]
            series[f"m={r['m']}"] = (xs, ys)
            rows.extend([r["m"], t, v] for t, v in r["curve"])
        write_csv(out / f"fig1_N{n}.csv", "fig1", ["m", "iter", "avg_train_loss"], rows)
        write_svg(
            out / f"fig1_N{n}.svg",
            render_svg_loss_plot(series, title=f"N={n}"),
        )


# --- approximation experiment ---

def run_approx(
    cfg: RunConfig,
    widths: list[int],
    dims: list[int],
    trials: int,
    delta: float,
    oracle_draws: int | None = None,
) -> dict[str, Any]:
    out = Path(cfg.output.directory)
    base = make_represented(cfg.target, cfg.model)
    kwargs = {"oracle_draws": oracle_draws} if oracle_draws else {}
    result = fm_approx_experiment(
        base, widths=widths, dims=dims, trials=trials, delta=delta,
        rng=RngStream(cfg.model.seed, STREAM_BASIS), **kwargs,
    )
    write_csv(
        out / "approx.csv", "approx",
        ["d", "m", "trials", "delta", "mean_error", "max_error", "bound", "failure_fraction", "pass"],
        [
            [c.d, c.m, c.trials, c.delta, c.mean_error, c.max_error, c.bound,
             c.failure_fraction, c.failure_fraction <= c.delta]
            for c in result.cells
        ],
    )
    write_csv(
        out / "approx_decoupled.csv", "approx_decoupled",
        ["d", "reference_m", "k", "rms_error"],
        [
            [rate.d, rate.reference_m, k, err]
            for rate in result.decoupled
            for k, err in zip(rate.basis_sizes, rate.rms_errors)
        ],
    )
    payload = {"schema_version": JSON_SCHEMA_VERSION, **result.model_dump(mode="json")}
    write_json(out / "approx.json", payload)
    return payload
