import logging
import logging.config
import sys
from logging import Logger
from pathlib import Path
from typing import List, Optional

import yaml

from ..common.errors import DomainError, FormatError
from ..settings import app_settings
from .commands import EXIT_USAGE
from .router import build_parser

logger: Logger = logging.getLogger(__name__)

DEFAULT_LOG_CONFIG = Path(__file__).resolve().parent.parent / "logging.yaml"


def setup_logging(path: Optional[str] = None, *, verbose: bool = False) -> None:
    with open(path or DEFAULT_LOG_CONFIG, encoding="utf-8") as f:
        logging.config.dictConfig(yaml.safe_load(f))
    if verbose:
        logging.getLogger("txreach").setLevel(logging.DEBUG)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_config, verbose=args.verbose)
        logger.debug(app_settings)
        return args.handler(args)
    except (FormatError, DomainError, OSError) as e:
        sys.stderr.write(f"txreach {args.command}: {e}\n")
        return EXIT_USAGE
    except Exception:
        logger.exception("failed")
        raise


if __name__ == "__main__":
    sys.exit(main())
