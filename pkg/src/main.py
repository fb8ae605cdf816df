"""hssolve entry point - parses the command line and dispatches to a command."""

from __future__ import annotations

import logging
import sys

from src.cli import create_parser
from src.core.config import load_config
from src.core.errors import HssError

logger = logging.getLogger("hssolve")


def main(argv: list[str] | None = None) -> int:
    """Application entry point. Returns the process exit code."""
    if sys.version_info < (3, 10):
        print("Python 3.10 or higher is required.")
        return 1

    parser = create_parser()
    args = parser.parse_args(argv)
    config = load_config(args.config)

    log_cfg = config["logging"]
    level = logging.DEBUG if args.verbose else getattr(logging, str(log_cfg["level"]).upper(), logging.INFO)
    logging.basicConfig(level=level, format=log_cfg["format"])
    logging.getLogger("hssolve").setLevel(level)

    try:
        return args.handler(args, config)
    except HssError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
