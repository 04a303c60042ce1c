import argparse
import logging
from logging import Logger
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ...common.errors import FormatError
from ...common.formats import read_instance
from ...common.generators import make_rng
from ...common.geom_core import TransmissionInstance
from ...common.reference import ClosureMatrix, brute_continuous, closure
from ...common.serialization import Oracle
from ...settings import app_settings
from . import EXIT_MISMATCH, EXIT_OK, write_output
from .build import ORACLE_KINDS, build_oracle

logger: Logger = logging.getLogger(__name__)


def parse_pairs(tokens: List[str]) -> Optional[int]:
    """None for every ordered pair, else the sample size of 'sample N'."""
    match tokens:
        case ["all"]:
            return None
        case ["sample", count] if count.isdigit():
            return int(count)
        case _:
            raise FormatError(f"--pairs expects 'all' or 'sample N', got {' '.join(tokens)!r}")


def select_pairs(n: int, sample: Optional[int], seed: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if sample is None:
        ps, qs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return np.stack([ps.ravel(), qs.ravel()], axis=1)
    rng = make_rng(seed)
    return rng.integers(0, n, size=(sample, 2))


def plane_targets(inst: TransmissionInstance, pairs: np.ndarray, seed: int) -> np.ndarray:
    """A target near each pair's second point, within that point's radius."""
    rng = make_rng(seed + 1)
    qs = pairs[:, 1]
    offsets = rng.uniform(-1.0, 1.0, size=(len(qs), 2)) * inst.rs[qs, None]
    return np.round(np.stack([inst.xs[qs], inst.ys[qs]], axis=1) + offsets)


def find_mismatches(
    oracle: Oracle, reach: ClosureMatrix, pairs: np.ndarray, *, seed: int, progress: bool = False
) -> List[Tuple]:
    rows = []
    discrete = oracle.discrete if oracle.kind == "continuous" else oracle
    answers = discrete.query_many(pairs)
    for (p, q), got in zip(pairs, answers):
        expected = reach.reaches(int(p), int(q))
        if bool(got) != expected:
            rows.append(("D", int(p), int(q), None, None, expected, bool(got)))

    if oracle.kind == "continuous":
        targets = plane_targets(oracle.inst, pairs, seed)
        for (s, _), t in tqdm(zip(pairs, targets), total=len(pairs), disable=not progress, desc="continuous pairs"):
            t = (float(t[0]), float(t[1]))
            expected = brute_continuous(oracle.inst, int(s), t, reach=reach)
            got = oracle.query(int(s), t)
            if got != expected:
                rows.append(("C", int(s), None, t[0], t[1], expected, got))
    return rows


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("instance", help="instance file")
    parser.add_argument("--oracle", choices=ORACLE_KINDS, default="discrete")
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--pairs", nargs="+", default=["all"], help="'all' or 'sample N'")
    parser.add_argument("--seed", type=int, default=app_settings.seed)
    parser.add_argument(
        "--force", action="store_true", help=f"allow closures above {app_settings.closure_max_n} points"
    )
    parser.add_argument("--progress", action="store_true", default=app_settings.progress)
    parser.add_argument("--report", default=None, help="CSV of mismatching queries")


def run(args: argparse.Namespace) -> int:
    sample = parse_pairs(args.pairs)
    inst = read_instance(args.instance)
    oracle = build_oracle(inst, args.oracle, k=args.k, progress=args.progress)
    reach = closure(inst, force=args.force)
    pairs = select_pairs(inst.n, sample, args.seed)
    logger.info(f"Verifying {args.oracle} oracle on {len(pairs)} pairs")

    mismatches = find_mismatches(oracle, reach, pairs, seed=args.seed, progress=args.progress)
    if args.report:
        columns = ["type", "s", "q", "x", "y", "expected", "got"]
        pd.DataFrame(mismatches, columns=columns).to_csv(args.report, index=False)
    write_output(f"{len(mismatches)} mismatches\n", None)
    if mismatches:
        logger.warning(f"{len(mismatches)} mismatches, first: {mismatches[0]}")
        return EXIT_MISMATCH
    return EXIT_OK
