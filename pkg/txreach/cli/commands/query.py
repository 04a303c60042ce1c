import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from logging import Logger
from typing import List, Sequence

from ...common.errors import DomainError
from ...common.formats import ContinuousQuery, DiscreteQuery, Query, format_answers, read_instance, read_queries
from ...common.serialization import Oracle, load_oracle
from ...settings import app_settings
from . import EXIT_OK, write_output

logger: Logger = logging.getLogger(__name__)


def answer(oracle: Oracle, query: Query) -> bool:
    match query:
        case DiscreteQuery(s=s, q=q):
            if oracle.kind == "continuous":
                return oracle.discrete.query(s, q)
            return oracle.query(s, q)
        case ContinuousQuery(s=s):
            if oracle.kind != "continuous":
                raise DomainError(
                    f"continuous query 'C {s} {query.x} {query.y}' needs a continuous oracle, got {oracle.kind}"
                )
            return oracle.query(s, query.scaled(oracle.inst))


def answer_all(oracle: Oracle, queries: Sequence[Query], *, workers: int = 1) -> List[bool]:
    """Answers in query order; with several workers the oracle is shared read-only across threads."""
    if workers <= 1:
        return [answer(oracle, query) for query in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(partial(answer, oracle), queries))


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("oracle", help="oracle file")
    parser.add_argument("instance", help="instance file the oracle was built for")
    parser.add_argument("queries", help="query file with 'D s q' / 'C s x y' lines")
    parser.add_argument("--workers", type=int, default=app_settings.query_workers)
    parser.add_argument("-o", "--output", default=None, help="answers file (stdout if omitted)")


def run(args: argparse.Namespace) -> int:
    inst = read_instance(args.instance)
    oracle = load_oracle(args.oracle, inst)
    queries = read_queries(args.queries)
    answers = answer_all(oracle, queries, workers=args.workers)
    write_output(format_answers(answers), args.output)
    logger.info(f"Answered {len(answers)} queries, {sum(answers)} reachable")
    return EXIT_OK
