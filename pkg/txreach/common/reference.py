import logging
from dataclasses import dataclass
from logging import Logger
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, dijkstra, shortest_path

from ..settings import app_settings
from .errors import DomainError
from .geom_core import Point, TransmissionInstance, disks_holding, reach_mask
from .spanner import SpannerGraph

logger: Logger = logging.getLogger(__name__)


def explicit_matrix(inst: TransmissionInstance) -> csr_matrix:
    """Adjacency of the transmission graph, every ordered pair tested."""
    src: List[np.ndarray] = []
    dst: List[np.ndarray] = []
    for p in range(inst.n):
        hit = np.flatnonzero(reach_mask(inst, p))
        hit = hit[hit != p]
        src.append(np.full(len(hit), p, dtype=np.int64))
        dst.append(hit)
    rows = np.concatenate(src) if src else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64)
    return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(inst.n, inst.n))


def explicit_graph(inst: TransmissionInstance) -> List[List[int]]:
    adjacency = explicit_matrix(inst)
    return [adjacency.indices[adjacency.indptr[p] : adjacency.indptr[p + 1]].tolist() for p in range(inst.n)]


def explicit_bfs_depths(inst: TransmissionInstance, s: int) -> np.ndarray:
    """Hop depths from s on the explicit graph, -1 where unreachable."""
    s = inst.check_id(s)
    dist = shortest_path(explicit_matrix(inst), directed=True, unweighted=True, indices=s)
    return np.where(np.isfinite(dist), dist, -1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ClosureMatrix:
    bits: np.ndarray

    @property
    def n(self) -> int:
        return len(self.bits)

    def reaches(self, p: int, q: int) -> bool:
        return bool(self.bits[p, q])

    def row(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.bits[p])


def closure(inst: TransmissionInstance, *, force: bool = False) -> ClosureMatrix:
    """Reflexive transitive closure by one BFS per vertex over the explicit graph."""
    if inst.n > app_settings.closure_max_n and not force:
        raise DomainError(f"closure of {inst.n} points exceeds closure_max_n={app_settings.closure_max_n}")
    adjacency = explicit_matrix(inst)
    bits = np.zeros((inst.n, inst.n), dtype=bool)
    for p in range(inst.n):
        bits[p, breadth_first_order(adjacency, p, directed=True, return_predecessors=False)] = True
    return ClosureMatrix(bits=bits)


def brute_continuous(inst: TransmissionInstance, s: int, t: Point, *, reach: Optional[ClosureMatrix] = None) -> bool:
    s = inst.check_id(s)
    reach = reach or closure(inst)
    ps = reach.row(s)
    return bool(np.any(disks_holding(inst, t, ps)))


def brute_stretch(inst: TransmissionInstance, spanner: SpannerGraph) -> float:
    """Largest ratio of spanner path length to Euclidean length over all graph edges."""
    adjacency = explicit_matrix(inst).tocoo()
    if adjacency.nnz == 0:
        return 1.0
    sources = np.unique(adjacency.row)
    dist = dijkstra(spanner.forward, directed=True, indices=sources)
    row_of = {int(u): idx for idx, u in enumerate(sources)}
    worst = 1.0
    for u, p in zip(adjacency.row, adjacency.col):
        length = float(np.hypot(inst.xs[u] - inst.xs[p], inst.ys[u] - inst.ys[p]))
        worst = max(worst, float(dist[row_of[int(u)], p]) / length)
    return worst


def brute_chain_indices(
    inst: TransmissionInstance, chain: Sequence[int], *, reach: Optional[ClosureMatrix] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """(i, j) for one chain straight from the closure, with the 0 / len+1 sentinels."""
    reach = reach or closure(inst)
    t = len(chain)
    i_row = np.zeros(inst.n, dtype=np.int32)
    j_row = np.full(inst.n, t + 1, dtype=np.int32)
    for pos, p in enumerate(chain, start=1):
        i_row[reach.bits[:, p]] = pos
    for pos in range(t, 0, -1):
        j_row[reach.bits[chain[pos - 1]]] = pos
    return i_row, j_row
