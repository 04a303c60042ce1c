import argparse
import io
import logging
from logging import Logger
from time import perf_counter, perf_counter_ns
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from tqdm import tqdm

from ...common.errors import FormatError
from ...common.generators import DISTRIBUTIONS, generate, make_rng
from ...common.geom_core import TransmissionInstance
from ...common.septree import SeparationTree, crossing_constant
from ...common.serialization import Oracle, dumps_oracle
from ...settings import app_settings
from . import EXIT_OK, write_output
from .build import ORACLE_KINDS, build_oracle

logger: Logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["n", "build_ms", "bytes", "mean_query_us", "p99_query_us", "chain_count", "separator_crossings"]


def parse_sizes(text: str) -> List[int]:
    try:
        sizes = [int(token) for token in text.replace(",", " ").split()]
    except ValueError:
        raise FormatError(f"--sizes expects a comma separated list of integers, got {text!r}")
    if not sizes or any(n < 0 for n in sizes):
        raise FormatError(f"--sizes expects non-negative sizes, got {text!r}")
    return sizes


def time_queries(oracle: Oracle, inst: TransmissionInstance, count: int, seed: int) -> np.ndarray:
    """Per-query wall times in microseconds."""
    if inst.n == 0 or count == 0:
        return np.zeros(0)
    rng = make_rng(seed)
    sources = rng.integers(0, inst.n, size=count)
    if oracle.kind == "continuous":
        lo = np.array([inst.xs.min(), inst.ys.min()])
        hi = np.array([inst.xs.max(), inst.ys.max()])
        targets = [(float(x), float(y)) for x, y in np.round(rng.uniform(lo, hi, size=(count, 2)))]
    else:
        targets = [int(q) for q in rng.integers(0, inst.n, size=count)]
    times = np.empty(count)
    for idx, (s, t) in enumerate(zip(sources, targets)):
        start = perf_counter_ns()
        oracle.query(int(s), t)
        times[idx] = (perf_counter_ns() - start) / 1000.0
    return times


def oracle_septree(oracle: Oracle) -> Optional[SeparationTree]:
    if oracle.kind == "continuous":
        return oracle.discrete.septree
    return getattr(oracle, "septree", None)


def bench_size(
    n: int, kind: str, *, distribution: str, seed: int, repeats: int, queries: int, k: Optional[int]
) -> Dict:
    inst = generate(n, distribution, seed)
    build_times = []
    for _ in range(max(repeats, 1)):
        start = perf_counter()
        oracle = build_oracle(inst, kind, k=k)
        build_times.append((perf_counter() - start) * 1000.0)
    times = time_queries(oracle, inst, queries, seed)
    stats = oracle.stats()
    septree = oracle_septree(oracle)
    fitted = crossing_constant(septree) if septree is not None else None
    if fitted is not None:
        logger.info(f"n={n}: separator crossings fit c={fitted:.3f} sqrt(m)")
    return {
        "n": n,
        "build_ms": min(build_times),
        "bytes": len(dumps_oracle(oracle)),
        "mean_query_us": float(times.mean()) if len(times) else float("nan"),
        "p99_query_us": float(np.percentile(times, 99)) if len(times) else float("nan"),
        "chain_count": stats["chain_count"],
        "separator_crossings": stats["separator_crossings"],
    }


def query_time_slope(df: pd.DataFrame) -> Optional[float]:
    """Slope of log(mean query time) against log(n)."""
    usable = df[(df["n"] > 1) & (df["mean_query_us"] > 0)]
    if usable["n"].nunique() < 2:
        return None
    X = np.log(usable[["n"]].to_numpy(dtype=float))
    model = LinearRegression().fit(X, np.log(usable["mean_query_us"].to_numpy()))
    return float(model.coef_[0])


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sizes", type=parse_sizes, required=True, help="comma separated instance sizes")
    parser.add_argument("--oracle", choices=ORACLE_KINDS, default="discrete")
    parser.add_argument("--repeats", type=int, default=1, help="builds per size, the fastest is reported")
    parser.add_argument("--queries", type=int, default=1000, help="timed queries per size")
    parser.add_argument("--distribution", default="uniform", help=", ".join(DISTRIBUTIONS))
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--seed", type=int, default=app_settings.seed)
    parser.add_argument("--progress", action="store_true", default=app_settings.progress)
    parser.add_argument("-o", "--output", default=None, help="CSV file (stdout if omitted)")


def run(args: argparse.Namespace) -> int:
    rows = [
        bench_size(
            n,
            args.oracle,
            distribution=args.distribution,
            seed=args.seed,
            repeats=args.repeats,
            queries=args.queries,
            k=args.k,
        )
        for n in tqdm(args.sizes, disable=not args.progress, desc="bench")
    ]
    df = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    buffer = io.StringIO()
    df.to_csv(buffer, index=False)
    write_output(buffer.getvalue(), args.output)

    slope = query_time_slope(df)
    if slope is not None:
        logger.info(f"{args.oracle} query time grows like n^{slope:.3f}")
    return EXIT_OK
