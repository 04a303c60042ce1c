import logging
from dataclasses import dataclass
from logging import Logger
from typing import List, Optional, Set

import numpy as np
from scipy.sparse.csgraph import breadth_first_order

from .errors import DomainError
from .geom_core import TransmissionInstance
from .membership_index import StaticMembershipIndex
from .spanner import SpannerGraph

logger: Logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BfsResult:
    """Hop depths in the transmission graph; -1 marks unreachable points (and the source's parent)."""

    source: int
    depth: np.ndarray
    parent: np.ndarray

    def depth_of(self, v: int) -> Optional[int]:
        d = int(self.depth[v])
        return None if d < 0 else d

    def parent_of(self, v: int) -> Optional[int]:
        u = int(self.parent[v])
        return None if u < 0 else u

    def reached(self) -> Set[int]:
        return {int(v) for v in np.flatnonzero(self.depth >= 0)}

    def path_to(self, v: int) -> Optional[List[int]]:
        if self.depth[v] < 0:
            return None
        path = [int(v)]
        while path[-1] != self.source:
            path.append(int(self.parent[path[-1]]))
        return path[::-1]


def bfs_levels(spanner: SpannerGraph, inst: TransmissionInstance, s: int) -> BfsResult:
    """
    Breadth-first levels of the transmission graph computed from the spanner alone.

    Level i+1 is grown by walking spanner edges out of level i and out of vertices already
    confirmed for level i+1. A vertex reached this way is confirmed only if some disk of
    level i holds it; the minimum-power such disk becomes its parent. Vertices reached but
    not held stay open for later levels.

    Parameters:
    - spanner (SpannerGraph): spanner of `inst` (any k > 8).
    - inst (TransmissionInstance): the instance.
    - s (int): source id.
    """
    s = inst.check_id(s)
    depth = np.full(inst.n, -1, dtype=np.int64)
    parent = np.full(inst.n, -1, dtype=np.int64)
    depth[s] = 0

    frontier = np.array([s], dtype=np.int64)
    level = 0
    while len(frontier):
        held = StaticMembershipIndex(inst.ex[frontier], inst.ey[frontier], inst.er[frontier], frontier)
        confirmed: List[int] = []
        rejected: Set[int] = set()
        stack = [int(u) for u in frontier]
        while stack:
            u = stack.pop()
            for v in spanner.out_neighbors(u):
                v = int(v)
                if depth[v] >= 0 or v in rejected:
                    continue
                hit = held.min_power(*inst.exact_coords(v))
                if hit is None or hit[1] > 0:
                    rejected.add(v)
                    continue
                depth[v] = level + 1
                parent[v] = hit[0]
                confirmed.append(v)
                stack.append(v)
        level += 1
        frontier = np.array(sorted(confirmed), dtype=np.int64)

    logger.debug(f"bfs from {s}: {int((depth >= 0).sum())} points over {level} levels")
    return BfsResult(source=s, depth=depth, parent=parent)


def reachable_set(spanner: SpannerGraph, s: int, *, reverse: bool = False) -> Set[int]:
    """Ids reachable from s along spanner edges (or reaching s when `reverse`)."""
    if not 0 <= s < spanner.n:
        raise DomainError(f"point id {s} out of range [0, {spanner.n})")
    graph = spanner.reverse if reverse else spanner.forward
    order = breadth_first_order(graph, s, directed=True, return_predecessors=False)
    return {int(v) for v in order}
