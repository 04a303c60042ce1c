import logging
from logging import Logger
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .discrete_oracle import DiscreteOracle, build_discrete_oracle
from .errors import DomainError
from .geom_core import Point, TransmissionInstance, cone_key, cone_of, exact_scalar
from .membership_index import OrderedMembershipTree

logger: Logger = logging.getLogger(__name__)

REPRESENTATIVE_CONES = 6


def select_representatives(inst: TransmissionInstance, R_t: Iterable[int], t: Point) -> List[int]:
    """
    At most six points of R_t such that every disk of R_t holds one of them: per cone
    of opening pi/3 at t, the member closest to t along the cone bisector (ties by id).
    A member sitting on t lies in every disk of R_t and is returned alone.
    """
    tx, ty = exact_scalar(t[0]), exact_scalar(t[1])
    best = {}
    for p in sorted(inst.check_id(p) for p in R_t):
        px, py = inst.exact_coords(p)
        if px == tx and py == ty:
            return [p]
        c = cone_of(REPRESENTATIVE_CONES, (tx, ty), (px, py))
        candidate = (cone_key(REPRESENTATIVE_CONES, c, float(px - tx), float(py - ty)), p)
        if c not in best or candidate < best[c]:
            best[c] = candidate
    return sorted(p for _, p in best.values())


class ContinuousOracle:
    """Reachability from a point s of the instance to an arbitrary plane point t."""

    kind = "continuous"

    def __init__(self, discrete: DiscreteOracle, remaining_order: Optional[np.ndarray] = None):
        self.discrete = discrete
        self.inst = inst = discrete.inst
        if remaining_order is None:
            remaining = np.asarray(discrete.decomposition.remaining, dtype=np.int64)
            order = remaining[np.lexsort((remaining, inst.ys[remaining], inst.xs[remaining]))]
        else:
            order = np.asarray(remaining_order, dtype=np.int64)
            if sorted(order.tolist()) != list(discrete.decomposition.remaining):
                raise DomainError("remaining_order is not a permutation of the remaining points")
        self.remaining_tree = OrderedMembershipTree(inst.ex[order], inst.ey[order], inst.er[order], order)
        self.chain_trees: List[OrderedMembershipTree] = []
        for chain in discrete.decomposition.chains:
            ids = np.asarray(chain, dtype=np.int64)
            self.chain_trees.append(OrderedMembershipTree(inst.ex[ids], inst.ey[ids], inst.er[ids], ids))

    def report_containing(self, t: Point) -> Set[int]:
        """Points of R whose disks hold t."""
        positions = self.remaining_tree.report_containing(t[0], t[1])
        return {int(p) for p in self.remaining_tree.ids[positions]}

    def chain_first_containing(self, chain: int, t: Point) -> Optional[int]:
        """1-based position of the first chain point whose disk holds t."""
        pos = self.chain_trees[chain].first_containing(t[0], t[1])
        return None if pos is None else pos + 1

    def query(self, s: int, t: Point) -> bool:
        s = self.inst.check_id(s)
        i_s = self.discrete.table.i[:, s] if self.chain_trees else ()
        for chain, reach in enumerate(i_s):
            if reach == 0:
                continue
            first = self.chain_first_containing(chain, t)
            if first is not None and first <= reach:
                return True
        representatives = select_representatives(self.inst, self.report_containing(t), t)
        return any(self.discrete.query(s, q) for q in representatives)

    def query_many(self, queries: Sequence[Tuple[int, Point]]) -> np.ndarray:
        return np.array([self.query(s, t) for s, t in queries], dtype=bool)

    def stats(self):
        return self.discrete.stats()


def build_continuous_oracle(
    inst: TransmissionInstance,
    *,
    discrete: Optional[DiscreteOracle] = None,
    k: Optional[int] = None,
    progress: Optional[bool] = None,
) -> ContinuousOracle:
    discrete = discrete or build_discrete_oracle(inst, k=k, progress=progress)
    logger.info(
        f"Building continuous layer over {len(discrete.decomposition.remaining)} points "
        f"and {discrete.table.chain_count} chains"
    )
    return ContinuousOracle(discrete)


def report_containing(oracle: ContinuousOracle, t: Point) -> Set[int]:
    return oracle.report_containing(t)


def chain_first_containing(oracle: ContinuousOracle, chain: int, t: Point) -> Optional[int]:
    return oracle.chain_first_containing(chain, t)


def query_continuous(oracle: ContinuousOracle, s: int, t: Point) -> bool:
    return oracle.query(s, t)
