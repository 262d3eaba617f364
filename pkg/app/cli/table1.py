import argparse

from app.cli.common import TABLE1_DOCUMENT, add_common_arguments, resolve_config
from app.services.experiment_service import load_config, parse_config, run_table1


def handle(args: argparse.Namespace) -> int:
    # widths before --scale caps them, for the m_nominal column
    nominal = parse_config(TABLE1_DOCUMENT) if args.config is None else load_config(args.config)
    cfg = resolve_config(args, preset_table1=True)
    run_table1(cfg, nominal.grid.widths, workers=args.workers, timings=args.timings)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "table1", help="width x sample-size grid of final average train / expected losses",
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=handle)
