import argparse

from app.cli.common import add_common_arguments, resolve_config
from app.core.constants import APPROX_MIN_TRIALS
from app.core.exceptions import ConfigError
from app.schemas.problem import TargetKind
from app.services.experiment_service import run_approx


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("expected positive integers")
    return values


def handle(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if cfg.target.kind is not TargetKind.represented:
        cfg = cfg.model_copy(update={"target": cfg.target.model_copy(update={"kind": TargetKind.represented})})
    if not 0.0 < args.delta < 1.0:
        raise ConfigError([f"--delta: expected a value in (0, 1), got {args.delta}"])
    trials = max(APPROX_MIN_TRIALS, round(args.trials * args.scale))
    run_approx(cfg, args.widths, args.dims, trials, args.delta, oracle_draws=args.oracle_draws)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("approx", help="random-feature approximation experiment")
    add_common_arguments(parser)
    parser.add_argument("--widths", type=_int_list, default=[64, 256, 1024])
    parser.add_argument("--dims", type=_int_list, default=[1, 3])
    parser.add_argument("--trials", type=int, default=500)
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--oracle-draws", type=int, default=None)
    parser.set_defaults(handler=handle)
