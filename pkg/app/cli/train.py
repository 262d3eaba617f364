import argparse

from app.cli.common import add_common_arguments, resolve_config
from app.services.experiment_service import override_iterations, run_train


def handle(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.T is not None:
        cfg = override_iterations(cfg, args.T)
    run_train(cfg, timings=args.timings)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="single training run: curve CSV, summary JSON, SVG")
    add_common_arguments(parser)
    parser.add_argument("--T", type=int, help="override the iteration count")
    parser.set_defaults(handler=handle)
