import argparse
import logging
from logging import Logger
from typing import Optional

from ...common.continuous_oracle import build_continuous_oracle
from ...common.discrete_oracle import build_discrete_oracle
from ...common.errors import DomainError
from ...common.formats import read_instance
from ...common.geom_core import TransmissionInstance
from ...common.grid_oracle import build_grid_oracle
from ...common.serialization import Oracle, save_oracle
from ...settings import app_settings
from . import EXIT_OK

logger: Logger = logging.getLogger(__name__)

ORACLE_KINDS = ("discrete", "grid", "continuous")


def build_oracle(
    inst: TransmissionInstance, kind: str, *, k: Optional[int] = None, progress: Optional[bool] = None
) -> Oracle:
    match kind:
        case "discrete":
            return build_discrete_oracle(inst, k=k, progress=progress)
        case "grid":
            return build_grid_oracle(inst, progress=progress)
        case "continuous":
            return build_continuous_oracle(inst, k=k, progress=progress)
        case _:
            raise DomainError(f"unknown oracle kind {kind!r}; expected one of {', '.join(ORACLE_KINDS)}")


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("instance", help="instance file")
    parser.add_argument("--oracle", choices=ORACLE_KINDS, default="discrete")
    parser.add_argument("--k", type=int, default=None, help=f"cone count (default {app_settings.oracle_k})")
    parser.add_argument("--progress", action="store_true", default=app_settings.progress)
    parser.add_argument("-o", "--output", required=True, help="oracle file")


def run(args: argparse.Namespace) -> int:
    inst = read_instance(args.instance)
    oracle = build_oracle(inst, args.oracle, k=args.k, progress=args.progress)
    logger.info(f"Oracle stats: {oracle.stats()}")
    save_oracle(oracle, args.output)
    return EXIT_OK
