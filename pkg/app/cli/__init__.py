import argparse

from app.cli import approx, fig1, table1, train, verify
from app.config import settings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME)
    subparsers = parser.add_subparsers(dest="command", required=True)
    train.register(subparsers)
    table1.register(subparsers)
    fig1.register(subparsers)
    verify.register(subparsers)
    approx.register(subparsers)
    return parser
