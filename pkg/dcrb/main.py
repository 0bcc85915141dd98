from dotenv import load_dotenv

load_dotenv()

import sys
import time
from typing import Optional, Sequence

from dcrb.commands import build_parser
from dcrb.config import settings
from dcrb.exceptions import DCRBError
from dcrb.logger import configure_logging, get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNHANDLED = 1
EXIT_ERROR = 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and map failures to exit codes"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 for --help
        return e.code if isinstance(e.code, int) else EXIT_ERROR

    configure_logging(args.log_level or settings.LOG_LEVEL, args.log_file or settings.LOG_FILE)
    logger.info(f"Starting dcrb {args.command} v{settings.package_version} ({settings.ENVIRONMENT})")
    start_time = time.time()

    try:
        code = args.handler(args)
    except DCRBError as e:
        logger.error(f"{args.command} failed: {type(e).__name__} - {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unhandled exception in {args.command}: {type(e).__name__} - {e}")
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_UNHANDLED

    duration = time.time() - start_time
    logger.info(f"Finished dcrb {args.command} - Exit: {code} - Duration: {duration:.3f}s")
    return code


def run() -> None:
    """Console script entry point"""
    sys.exit(main())


if __name__ == "__main__":
    run()
