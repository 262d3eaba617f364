import argparse

from app.cli.common import add_common_arguments, resolve_config
from app.services.experiment_service import run_fig1


def handle(args: argparse.Namespace) -> int:
    run_fig1(resolve_config(args, preset_table1=True), workers=args.workers)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fig1", help="average training loss curves, one plot per N")
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)
