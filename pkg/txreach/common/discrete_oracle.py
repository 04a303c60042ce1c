import logging
from dataclasses import dataclass
from logging import Logger
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from tqdm import tqdm

from ..settings import app_settings
from .chains import Chain, ChainDecomposition, extract_chains
from .geom_core import TransmissionInstance
from .septree import SeparationTree, build_separation_tree
from .spanner import SpannerGraph, build_spanner

logger: Logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChainIndexTable:
    """
    Chain-major position tables (1-based positions).

    i[c, q]: largest position of chain c reachable from q, 0 if none.
    j[c, q]: smallest position of chain c that reaches q, len(chain c) + 1 if none.
    """

    i: np.ndarray
    j: np.ndarray
    lengths: np.ndarray

    @property
    def chain_count(self) -> int:
        return len(self.lengths)


def _sweep(graph: csr_matrix, chain: Chain, positions: Iterable[int], sentinel: int) -> np.ndarray:
    """Assign each position's newly reached vertices, traversing only unassigned ones."""
    n = graph.shape[0]
    table = np.full(n, sentinel, dtype=np.int32)
    assigned = np.zeros(n, dtype=bool)
    for pos in positions:
        p = chain[pos - 1]
        if assigned[p]:
            continue
        assigned[p] = True
        table[p] = pos
        frontier = np.array([p], dtype=np.int64)
        while len(frontier):
            reached = np.unique(graph[frontier].indices)
            reached = reached[~assigned[reached]]
            assigned[reached] = True
            table[reached] = pos
            frontier = reached
    return table


def build_chain_indices(
    inst: TransmissionInstance,
    spanner: SpannerGraph,
    chains: Sequence[Chain],
    *,
    progress: Optional[bool] = None,
) -> ChainIndexTable:
    """
    j(.) per chain by sweeping positions 1..t forward over the spanner, each sweep
    restricted to vertices no earlier position reached; i(.) the same way on the reversed
    spanner from position t down to 1.

    Parameters:
    - inst (TransmissionInstance): the instance.
    - spanner (SpannerGraph): spanner of `inst`.
    - chains (Sequence[Chain]): chains as point-id tuples.
    """
    progress = app_settings.progress if progress is None else progress
    n = inst.n
    i_table = np.zeros((len(chains), n), dtype=np.int32)
    j_table = np.zeros((len(chains), n), dtype=np.int32)
    lengths = np.array([len(chain) for chain in chains], dtype=np.int32)
    for c, chain in enumerate(tqdm(chains, disable=not progress, desc="chain indices")):
        t = len(chain)
        j_table[c] = _sweep(spanner.forward, chain, range(1, t + 1), t + 1)
        i_table[c] = _sweep(spanner.reverse, chain, range(t, 0, -1), 0)
    return ChainIndexTable(i=i_table, j=j_table, lengths=lengths)


class DiscreteOracle:
    """Point-to-point reachability: chain indices for paths touching a chain, a separation tree over R otherwise."""

    kind = "discrete"

    def __init__(
        self,
        inst: TransmissionInstance,
        decomposition: ChainDecomposition,
        table: ChainIndexTable,
        septree: SeparationTree,
        k: int,
    ):
        self.inst = inst
        self.decomposition = decomposition
        self.table = table
        self.septree = septree
        self.k = k
        self.in_remaining = decomposition.in_remaining

    def query(self, p: int, q: int) -> bool:
        p = self.inst.check_id(p)
        q = self.inst.check_id(q)
        if p == q:
            return True
        if self.table.chain_count and np.any(self.table.j[:, q] <= self.table.i[:, p]):
            return True
        if self.in_remaining[p] and self.in_remaining[q]:
            return self.septree.query(p, q)
        return False

    def query_many(self, pairs: Sequence[Tuple[int, int]]) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        for p in np.unique(pairs):
            self.inst.check_id(int(p))
        ps, qs = pairs[:, 0], pairs[:, 1]
        answers = ps == qs
        if self.table.chain_count:
            answers |= np.any(self.table.j[:, qs] <= self.table.i[:, ps], axis=0)
        open_pairs = np.flatnonzero(~answers & self.in_remaining[ps] & self.in_remaining[qs])
        for idx in open_pairs:
            answers[idx] = self.septree.query(int(ps[idx]), int(qs[idx]))
        return answers

    def stats(self) -> Dict:
        septree = self.septree.stats()
        return {
            "n": self.inst.n,
            "chain_count": self.table.chain_count,
            "chain_points": self.decomposition.total_chain_length,
            "remaining": len(self.decomposition.remaining),
            "threshold": self.decomposition.threshold,
            "septree_nodes": septree["nodes"],
            "separator_total": septree["separator_total"],
            "separator_crossings": int(sum(c for _, c in septree["crossings"])),
        }


def build_discrete_oracle(
    inst: TransmissionInstance,
    *,
    k: Optional[int] = None,
    progress: Optional[bool] = None,
) -> DiscreteOracle:
    k = app_settings.oracle_k if k is None else k
    logger.info(f"Building discrete oracle: n={inst.n} k={k}")
    decomposition = extract_chains(inst, progress=progress)
    spanner = build_spanner(inst, k, progress=progress)
    table = build_chain_indices(inst, spanner, decomposition.chains, progress=progress)
    septree = build_separation_tree(inst, decomposition.remaining, k=k, progress=progress)
    return DiscreteOracle(inst, decomposition, table, septree, k)


def query(oracle: DiscreteOracle, p: int, q: int) -> bool:
    return oracle.query(p, q)
