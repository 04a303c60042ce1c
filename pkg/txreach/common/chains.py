import logging
from dataclasses import dataclass, field
from logging import Logger
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..settings import app_settings
from .geom_core import Point, TransmissionInstance, cone_indices, disks_holding, edge_exists
from .membership_index import DynamicMembershipIndex

logger: Logger = logging.getLogger(__name__)

Chain = Tuple[int, ...]

# six cones of opening pi/3 around an extraction apex
APEX_CONES = 6


def chain_threshold(n: int) -> int:
    """Smallest integer L with L**3 >= n."""
    if n <= 0:
        return 0
    L = max(int(round(n ** (1.0 / 3.0))), 1)
    while L**3 < n:
        L += 1
    while L > 1 and (L - 1) ** 3 >= n:
        L -= 1
    return L


@dataclass(frozen=True, eq=False)
class ChainDecomposition:
    n: int
    chains: List[Chain]
    remaining: List[int]
    threshold: int
    chain_of: np.ndarray = field(init=False, repr=False)
    position_in_chain: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        chain_of = np.full(self.n, -1, dtype=np.int64)
        position = np.zeros(self.n, dtype=np.int64)
        for c, chain in enumerate(self.chains):
            for pos, p in enumerate(chain, start=1):
                chain_of[p] = c
                position[p] = pos
        object.__setattr__(self, "chain_of", chain_of)
        object.__setattr__(self, "position_in_chain", position)

    @property
    def in_remaining(self) -> np.ndarray:
        return self.chain_of < 0

    @property
    def total_chain_length(self) -> int:
        return sum(len(chain) for chain in self.chains)


def _split_into_chains(inst: TransmissionInstance, apex: int, members: Sequence[int]) -> List[Chain]:
    members = np.asarray(members, dtype=np.int64)
    cones = cone_indices(APEX_CONES, inst.exact_coords(apex), inst.ex[members], inst.ey[members])
    chains: List[Chain] = []
    for c in range(APEX_CONES):
        in_cone = members[cones == c]
        if not len(in_cone):
            continue
        in_cone = inst.radius_order(in_cone)
        chain = [int(q) for q in in_cone]
        if not chains:
            chain.insert(0, apex)
        chains.append(tuple(chain))
    return chains


def extract_chains(inst: TransmissionInstance, *, progress: Optional[bool] = None) -> ChainDecomposition:
    """
    Repeatedly remove the smallest live disk D_p (ties by id) and ask the dynamic index
    for L further disks holding p, deleting each one found. With L hits, p and the hit
    centers are split by the six cones at p into radius-sorted chains and p is prepended
    to the first nonempty one; otherwise the hits are reinserted and p joins R.
    """
    progress = app_settings.progress if progress is None else progress
    n = inst.n
    L = chain_threshold(n)
    logger.info(f"Extracting chains: n={n} L={L}")

    live = DynamicMembershipIndex()
    for p in range(n):
        live.insert(p, *inst.exact_row(p))

    chains: List[Chain] = []
    remaining: List[int] = []
    order = inst.radius_order()
    for p in tqdm(order, disable=not progress, desc="chains"):
        p = int(p)
        if p not in live:
            continue
        live.delete(p)
        x, y = inst.exact_coords(p)
        hits: List[int] = []
        while len(hits) < L:
            q = live.query(x, y)
            if q is None:
                break
            live.delete(q)
            hits.append(q)
        if L > 0 and len(hits) == L:
            chains.extend(_split_into_chains(inst, p, hits))
        else:
            for q in hits:
                live.insert(q, *inst.exact_row(q))
            remaining.append(p)

    logger.info(f"Extracted {len(chains)} chains, |R|={len(remaining)}")
    return ChainDecomposition(n=n, chains=chains, remaining=sorted(remaining), threshold=L)


def is_chain(inst: TransmissionInstance, seq: Sequence[int]) -> bool:
    """Radii non-decreasing and every later point reaches every earlier one."""
    seq = [inst.check_id(p) for p in seq]
    if not seq or len(set(seq)) != len(seq):
        return False
    radii = [inst.exact_row(p)[2] for p in seq]
    if any(b < a for a, b in zip(radii, radii[1:])):
        return False
    return all(edge_exists(inst, seq[j], seq[i]) for j in range(len(seq)) for i in range(j))


def thickness_at(inst: TransmissionInstance, S: Iterable[int], x: Point) -> int:
    """Number of disks of S holding x (linear scan)."""
    S = np.fromiter((inst.check_id(p) for p in S), dtype=np.int64)
    if not len(S):
        return 0
    return int(np.count_nonzero(disks_holding(inst, x, S)))
