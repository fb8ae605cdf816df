"""Argument parser factory; registers one module per command."""

from __future__ import annotations

import argparse

from src.commands import comb_demo, comm_model, compress, map_plan, matvec_bench, power, solve

_COMMANDS = (compress, solve, matvec_bench, power, map_plan, comm_model, comb_demo)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hssolve",
        description="Randomized HSS compression, ULV solver and parallel planning tools",
    )
    parser.add_argument("--config", help="YAML configuration file (default ~/.hssolve/config.yaml)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in _COMMANDS:
        module.register(subparsers)
    return parser
