import argparse

from . import oracle, run, sweep

COMMANDS = (run, sweep, oracle)


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subcommand per module in COMMANDS"""
    parser = argparse.ArgumentParser(
        prog="dcrb",
        description="Randomized benchmarking of mid-circuit measurement and feedforward blocks",
    )
    parser.add_argument("--log-level", default=None, help="Overrides DCRB_LOG_LEVEL")
    parser.add_argument("--log-file", default=None, help="Overrides DCRB_LOG_FILE")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser


__all__ = ["build_parser", "run", "sweep", "oracle"]
