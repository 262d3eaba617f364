import argparse

from app.cli.common import add_common_arguments, resolve_config
from app.services.verify_service import run_verify


def handle(args: argparse.Namespace) -> int:
    run_verify(resolve_config(args), scale=args.scale)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("verify", help="run the theory check suite; exit 2 on any failure")
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)
