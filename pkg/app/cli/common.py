import argparse

from app.config import settings
from app.schemas.run_config import RunConfig
from app.services.experiment_service import apply_overrides, apply_scale, load_config, parse_config

TABLE1_DOCUMENT = '[experiment]\npreset = "table1"\n'


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="seed for every random stream of the run")
    parser.add_argument("--out", help=f"output directory (default {settings.OUTPUT_DIR})")
    parser.add_argument(
        "--scale", type=float, default=1.0,
        help="desk-scale factor in (0, 1]: shrinks T and n_test, caps widths",
    )
    parser.add_argument("--workers", type=int, default=settings.MAX_WORKERS)
    parser.add_argument(
        "--timings", action="store_true", default=settings.RECORD_TIMINGS,
        help="record wall-clock timings in JSON summaries",
    )


def resolve_config(args: argparse.Namespace, preset_table1: bool = False) -> RunConfig:
    if args.config is None and preset_table1:
        cfg = parse_config(TABLE1_DOCUMENT)
    else:
        cfg = load_config(args.config)
    cfg = apply_overrides(cfg, seed=args.seed, out=args.out)
    return apply_scale(cfg, args.scale)
