import argparse
import logging
from logging import Logger

from ...common.formats import format_instance
from ...common.generators import DISTRIBUTIONS, generate
from ...settings import app_settings
from . import EXIT_OK, write_output

logger: Logger = logging.getLogger(__name__)


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("n", type=int, help="number of points")
    parser.add_argument(
        "--distribution",
        default="uniform",
        help=f"one of {', '.join(DISTRIBUTIONS)}; bounded-psi also accepts the form 'bounded-psi(PSI)'",
    )
    parser.add_argument("--psi", type=float, default=None, help="radius ratio bound for bounded-psi")
    parser.add_argument("--seed", type=int, default=app_settings.seed)
    parser.add_argument("-o", "--output", default=None, help="instance file (stdout if omitted)")


def run(args: argparse.Namespace) -> int:
    inst = generate(args.n, args.distribution, args.seed, psi=args.psi)
    write_output(format_instance(inst), args.output)
    logger.info(f"Generated {inst.n} points ({args.distribution}, seed {args.seed})")
    return EXIT_OK
