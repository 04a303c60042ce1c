import logging
from dataclasses import dataclass, field
from logging import Logger
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import ConvexHull, KDTree, QhullError

from ..settings import app_settings
from .errors import DomainError
from .geom_core import Point, exact_columns, exact_scalar, holds, power_values

logger: Logger = logging.getLogger(__name__)

Disk = Tuple[Point, float]
Span = Tuple[int, int]


def _as_arrays(disks: Sequence[Disk]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return exact_columns([d[0][0] for d in disks], [d[0][1] for d in disks], [d[1] for d in disks])


def _graph(src: np.ndarray, dst: np.ndarray, size: int) -> csr_matrix:
    graph = csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(size, size))
    graph.sum_duplicates()
    return graph


class StaticMembershipIndex:
    """
    Minimum power distance over a fixed disk set.

    Every disk is lifted to the point (c, |c|^2 - r^2); the power of a query x is
    |x|^2 + (-2x, 1) . lifted, a linear function, so the minimizing disk is a vertex of the
    lower hull of the lifted points (the power diagram). A query walks the hull's edge graph
    downhill from the disk whose center is nearest to x, then settles ties among the hull
    vertices and coplanar points around the minimum by (power, id).

    Powers are evaluated with `power_values`, exactly for integral disks and points. Sets of
    at most `scan_max` disks, and sets whose lifted points are flat, are answered by a scan.
    A masked query whose minimizer is inactive scans the active entries block by block.
    """

    def __init__(
        self,
        xs: Sequence[float],
        ys: Sequence[float],
        rs: Sequence[float],
        ids: Optional[Sequence[int]] = None,
        *,
        block_size: Optional[int] = None,
        scan_max: Optional[int] = None,
    ):
        xs, ys, rs = exact_columns(xs, ys, rs)
        if ids is None:
            ids = np.arange(len(xs), dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if not (len(xs) == len(ys) == len(rs) == len(ids)):
            raise DomainError("disk arrays must have equal length")
        if len(rs) and not np.all(np.asarray(rs > 0, dtype=bool)):
            raise DomainError("disk radii must be > 0")

        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.xs = xs[order]
        self.ys = ys[order]
        self.rr = rs[order] * rs[order]
        self.fx = self.xs.astype(np.float64)
        self.fy = self.ys.astype(np.float64)
        self.block_size = block_size or app_settings.index_block_size
        self.scan_max = scan_max or app_settings.index_scan_max

        frr = self.rr.astype(np.float64)
        extent = float(max(np.abs(self.fx).max(), np.abs(self.fy).max())) if self.size else 0.0
        # float powers are compared with this much slack; integral disks and points compare exactly
        self._exact = self.xs.dtype != np.float64
        self._slack = 1e-9 * (1.0 + 4.0 * extent * extent + float(frr.max(initial=0.0)))

        self._blocks: Optional[List[np.ndarray]] = None
        self._hull = False
        if self.size > self.scan_max:
            self._hull = self._build_envelope()

    @property
    def size(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return self.size

    @property
    def uses_envelope(self) -> bool:
        return self._hull

    def _build_envelope(self) -> bool:
        # translate and scale so the lifted coordinates stay near unit size
        mx, my = float(self.fx.mean()), float(self.fy.mean())
        s = float(max(np.ptp(self.fx), np.ptp(self.fy))) or 1.0
        ux, uy = (self.fx - mx) / s, (self.fy - my) / s
        lifted = np.stack([ux, uy, ux * ux + uy * uy - self.rr.astype(np.float64) / (s * s)], axis=1)
        try:
            hull = ConvexHull(lifted, qhull_options="Qc")
        except (QhullError, ValueError):
            logger.debug(f"lifted disks are degenerate ({self.size} disks); scanning instead")
            return False

        simplices = hull.simplices
        a, b, c = simplices[:, 0], simplices[:, 1], simplices[:, 2]
        adjacency = _graph(np.concatenate([a, b, c, b, c, a]), np.concatenate([b, c, a, a, b, c]), self.size)
        self._nbr_ptr, self._nbr_idx = adjacency.indptr, adjacency.indices

        # coplanar points hang off every vertex of the facet Qhull assigned them to
        coplanar = hull.coplanar
        if len(coplanar):
            facets = simplices[coplanar[:, 1]]
            points = np.repeat(coplanar[:, 0], 3)
            extra = _graph(facets.ravel(), points, self.size)
        else:
            extra = _graph(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), self.size)
        self._extra_ptr, self._extra_idx = extra.indptr, extra.indices

        self._vertices = np.asarray(hull.vertices, dtype=np.int64)
        self._start_tree = KDTree(np.stack([self.fx[self._vertices], self.fy[self._vertices]], axis=1))
        return True

    # scans

    def _powers(self, positions, x, y) -> np.ndarray:
        return power_values(self.xs[positions], self.ys[positions], self.rr[positions], x, y)

    def _build_blocks(self):
        blocks: List[np.ndarray] = []
        stack = [np.arange(self.size)]
        while stack:
            positions = stack.pop()
            if len(positions) <= self.block_size:
                blocks.append(np.sort(positions))
                continue
            bx = self.fx[positions]
            by = self.fy[positions]
            coords = bx if np.ptp(bx) >= np.ptp(by) else by
            half = len(positions) // 2
            positions = positions[np.argpartition(coords, half)]
            stack.append(positions[half:])
            stack.append(positions[:half])

        frr = self.rr.astype(np.float64)
        # boxes grow by a few ulps of the largest coordinate to cover rounded centers
        pad = 4.0 * float(np.spacing(max(np.abs(self.fx).max(), np.abs(self.fy).max(), 1.0)))
        self._blocks = blocks
        self._bxmin = np.array([self.fx[b].min() for b in blocks]) - pad
        self._bxmax = np.array([self.fx[b].max() for b in blocks]) + pad
        self._bymin = np.array([self.fy[b].min() for b in blocks]) - pad
        self._bymax = np.array([self.fy[b].max() for b in blocks]) + pad
        self._brr = np.array([frr[b].max() for b in blocks])

    def _block_order(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        if self._blocks is None:
            self._build_blocks()
        fx, fy = float(x), float(y)
        gx = np.maximum(np.maximum(self._bxmin - fx, fx - self._bxmax), 0.0)
        gy = np.maximum(np.maximum(self._bymin - fy, fy - self._bymax), 0.0)
        squared = gx * gx + gy * gy
        # float lower bounds may overshoot the exact power by rounding
        bounds = (squared - self._brr) - 1e-9 * (squared + self._brr + 1.0)
        return np.argsort(bounds, kind="stable"), bounds

    def _scan_min_power(self, x, y, active: Optional[np.ndarray]) -> Optional[Tuple[int, float]]:
        if self.size <= self.scan_max:
            powers = self._powers(slice(None), x, y)
            live = np.ones(self.size, dtype=bool) if active is None else np.asarray(active, dtype=bool)
            if not live.any():
                return None
            best = powers[live].min()
            pos = int(np.flatnonzero(live & holds(powers - best))[0])
            return int(self.ids[pos]), float(best)

        best_pos, best_power = -1, None
        order, bounds = self._block_order(x, y)
        for b in order:
            if best_power is not None and bounds[b] > best_power:
                break
            positions = self._blocks[b]
            if active is not None:
                positions = positions[active[positions]]
                if not len(positions):
                    continue
            powers = self._powers(positions, x, y)
            i = int(np.argmin(powers))
            power, pos = powers[i], int(positions[i])
            if best_power is None or power < best_power or (power == best_power and pos < best_pos):
                best_pos, best_power = pos, power
        if best_pos < 0:
            return None
        return int(self.ids[best_pos]), float(best_power)

    def _scan_containing(self, x, y, active: Optional[np.ndarray]) -> Optional[int]:
        if self.size <= self.scan_max:
            hits = holds(self._powers(slice(None), x, y))
            if active is not None:
                hits &= active
            found = np.flatnonzero(hits)
            return int(self.ids[found[0]]) if len(found) else None

        order, bounds = self._block_order(x, y)
        for b in order:
            if bounds[b] > 0:
                break
            positions = self._blocks[b]
            hits = holds(self._powers(positions, x, y))
            if active is not None:
                hits &= active[positions]
            found = np.flatnonzero(hits)
            if len(found):
                return int(self.ids[positions[found[0]]])
        return None

    # envelope

    def _neighbors(self, v: int) -> np.ndarray:
        return self._nbr_idx[self._nbr_ptr[v] : self._nbr_ptr[v + 1]]

    def _coplanar(self, v: int) -> np.ndarray:
        return self._extra_idx[self._extra_ptr[v] : self._extra_ptr[v + 1]]

    def _envelope_candidates(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """Positions evaluated around the downhill minimum, with their powers."""
        _, nearest = self._start_tree.query((float(x), float(y)))
        v = int(self._vertices[nearest])
        pv = self._powers([v], x, y)[0]
        while True:
            around = self._neighbors(v)
            powers = self._powers(around, x, y)
            i = int(np.argmin(powers))
            if not powers[i] < pv:
                break
            v, pv = int(around[i]), powers[i]

        slack = self._tie_slack(x, y)
        seen = {v}
        positions, found = [v], [pv]
        ties = [v]
        while ties:
            u = ties.pop()
            around = [w for w in np.concatenate([self._neighbors(u), self._coplanar(u)]).tolist() if w not in seen]
            if not around:
                continue
            seen.update(around)
            powers = self._powers(around, x, y)
            for w, pw in zip(around, powers):
                positions.append(w)
                found.append(pw)
                if pw <= pv + slack:
                    ties.append(w)
        return np.asarray(positions, dtype=np.int64), np.array(found)

    def _tie_slack(self, x, y):
        if self._exact and isinstance(x, int) and isinstance(y, int):
            return 0
        return self._slack

    def min_power(self, x, y, active: Optional[np.ndarray] = None) -> Optional[Tuple[int, float]]:
        """
        Disk minimizing |x c|^2 - r^2, ties broken by the smaller id.

        Parameters:
        - x, y (float): query point.
        - active (np.ndarray): optional boolean mask aligned with `self.ids`; inactive entries are ignored.
        """
        if self.size == 0:
            return None
        x, y = exact_scalar(x), exact_scalar(y)
        if not self._hull:
            return self._scan_min_power(x, y, active)

        positions, powers = self._envelope_candidates(x, y)
        best = powers.min()
        tied = positions[holds(powers - best)]
        if active is not None:
            tied = tied[active[tied]]
            if not len(tied):
                return self._scan_min_power(x, y, active)
        pos = int(tied[np.argmin(self.ids[tied])])
        return int(self.ids[pos]), float(best)

    def containing(self, x, y, active: Optional[np.ndarray] = None) -> Optional[int]:
        """Id of some disk holding (x, y), or None."""
        if self.size == 0:
            return None
        x, y = exact_scalar(x), exact_scalar(y)
        if not self._hull:
            return self._scan_containing(x, y, active)

        positions, powers = self._envelope_candidates(x, y)
        best = powers.min()
        if best > 0:
            return None
        tied = positions[holds(powers - best)]
        if active is not None:
            tied = tied[active[tied]]
            if not len(tied):
                return self._scan_containing(x, y, active)
        return int(self.ids[tied].min())


def static_build(disks: Sequence[Disk], ids: Optional[Sequence[int]] = None, **kwargs) -> StaticMembershipIndex:
    xs, ys, rs = _as_arrays(disks)
    return StaticMembershipIndex(xs, ys, rs, ids, **kwargs)


def min_power_disk(
    idx: StaticMembershipIndex, x: Point, active: Optional[np.ndarray] = None
) -> Optional[Tuple[int, float]]:
    return idx.min_power(x[0], x[1], active=active)


class OrderedMembershipTree:
    """
    Balanced binary tree over a fixed sequence of disks. Node (lo, hi) covers sequence
    positions lo..hi-1 and splits at (lo + hi) // 2, so an in-order walk of the leaves
    reproduces the sequence. Nodes wider than `scan_max` carry a StaticMembershipIndex;
    narrower ones are answered by scanning their slice.
    """

    def __init__(
        self,
        xs: Sequence[float],
        ys: Sequence[float],
        rs: Sequence[float],
        ids: Optional[Sequence[int]] = None,
        *,
        scan_max: Optional[int] = None,
        block_size: Optional[int] = None,
    ):
        self.xs, self.ys, rs = exact_columns(xs, ys, rs)
        self.rr = rs * rs
        self.ids = np.arange(len(self.xs), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if len(rs) and not np.all(np.asarray(rs > 0, dtype=bool)):
            raise DomainError("disk radii must be > 0")
        self.scan_max = scan_max or app_settings.index_scan_max

        self._indexes: Dict[Span, StaticMembershipIndex] = {}
        stack = [self.root] if self.size else []
        while stack:
            span = stack.pop()
            lo, hi = span
            if hi - lo <= self.scan_max:
                continue
            self._indexes[span] = StaticMembershipIndex(
                self.xs[lo:hi],
                self.ys[lo:hi],
                rs[lo:hi],
                np.arange(lo, hi),
                scan_max=self.scan_max,
                block_size=block_size,
            )
            stack.extend(self.children(span))

    @property
    def size(self) -> int:
        return len(self.xs)

    def __len__(self) -> int:
        return self.size

    @property
    def root(self) -> Span:
        return (0, self.size)

    @property
    def height(self) -> int:
        return max(self.size - 1, 0).bit_length()

    def children(self, span: Span) -> Tuple[Span, ...]:
        lo, hi = span
        if hi - lo <= 1:
            return ()
        mid = (lo + hi) // 2
        return ((lo, mid), (mid, hi))

    def leaf_positions(self) -> List[int]:
        leaves: List[int] = []
        stack = [self.root] if self.size else []
        while stack:
            span = stack.pop()
            kids = self.children(span)
            if not kids:
                leaves.append(span[0])
            else:
                stack.extend(reversed(kids))
        return leaves

    def _slice_hits(self, lo: int, hi: int, x, y) -> np.ndarray:
        return holds(power_values(self.xs[lo:hi], self.ys[lo:hi], self.rr[lo:hi], x, y))

    def span_contains(self, span: Span, x, y) -> bool:
        lo, hi = span
        if hi - lo <= self.scan_max:
            return bool(np.any(self._slice_hits(lo, hi, x, y)))
        return self._indexes[span].containing(x, y) is not None

    def first_containing(self, x, y) -> Optional[int]:
        """Smallest sequence position whose disk holds (x, y), by left-biased descent."""
        if self.size == 0:
            return None
        x, y = exact_scalar(x), exact_scalar(y)
        span = self.root
        if span[1] - span[0] > self.scan_max and not self.span_contains(span, x, y):
            return None
        while span[1] - span[0] > self.scan_max:
            left, right = self.children(span)
            span = left if self.span_contains(left, x, y) else right
        lo, hi = span
        hits = np.flatnonzero(self._slice_hits(lo, hi, x, y))
        return lo + int(hits[0]) if len(hits) else None

    def report_containing(self, x, y) -> np.ndarray:
        """All sequence positions whose disk holds (x, y), ascending."""
        x, y = exact_scalar(x), exact_scalar(y)
        found: List[np.ndarray] = []
        stack = [self.root] if self.size else []
        while stack:
            span = stack.pop()
            lo, hi = span
            if hi - lo <= self.scan_max:
                hits = np.flatnonzero(self._slice_hits(lo, hi, x, y))
                if len(hits):
                    found.append(hits + lo)
            elif self.span_contains(span, x, y):
                stack.extend(reversed(self.children(span)))
        if not found:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(found)


def tree_build(ordered_disks: Sequence[Disk], **kwargs) -> OrderedMembershipTree:
    xs, ys, rs = _as_arrays(ordered_disks)
    return OrderedMembershipTree(xs, ys, rs, **kwargs)


def first_containing(tree: OrderedMembershipTree, x: Point) -> Optional[int]:
    return tree.first_containing(x[0], x[1])


def report_containing(tree: OrderedMembershipTree, x: Point) -> List[int]:
    return [int(p) for p in tree.report_containing(x[0], x[1])]


@dataclass
class _DynamicBlock:
    index: StaticMembershipIndex
    alive: np.ndarray
    slot: Dict[int, int] = field(default_factory=dict)

    @property
    def live(self) -> int:
        return int(self.alive.sum())


class DynamicMembershipIndex:
    """
    Insert/delete/containment over a mutable disk set (logarithmic method).

    Blocks are static indexes whose sizes follow a binary counter; deletions only clear a
    liveness flag, and all blocks are rebuilt once the dead share of stored entries reaches
    `rebuild_fraction`. Single writer.
    """

    def __init__(
        self,
        *,
        rebuild_fraction: Optional[float] = None,
        block_size: Optional[int] = None,
        scan_max: Optional[int] = None,
    ):
        self.rebuild_fraction = rebuild_fraction or app_settings.dynamic_rebuild_fraction
        self._index_kwargs = dict(block_size=block_size, scan_max=scan_max)
        self._blocks: List[_DynamicBlock] = []
        self._disks: Dict[int, Tuple[float, float, float]] = {}
        self._owner: Dict[int, _DynamicBlock] = {}
        self._stored = 0
        self.rebuilds = 0

    def __len__(self) -> int:
        return len(self._disks)

    def __contains__(self, disk_id: int) -> bool:
        return disk_id in self._disks

    def live_ids(self) -> List[int]:
        return sorted(self._disks)

    @property
    def block_sizes(self) -> List[int]:
        return [b.index.size for b in self._blocks]

    def _make_block(self, disk_ids: Sequence[int]) -> _DynamicBlock:
        rows = [self._disks[i] for i in disk_ids]
        xs, ys, rs = exact_columns([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])
        index = StaticMembershipIndex(xs, ys, rs, disk_ids, **self._index_kwargs)
        block = _DynamicBlock(index=index, alive=np.ones(index.size, dtype=bool))
        block.slot = {int(i): pos for pos, i in enumerate(index.ids)}
        for i in block.slot:
            self._owner[i] = block
        self._stored += index.size
        return block

    def _drop_block(self, block: _DynamicBlock) -> List[int]:
        self._blocks.remove(block)
        self._stored -= block.index.size
        return [int(i) for i in block.index.ids[block.alive]]

    def insert(self, disk_id: int, x: float, y: float, r: float):
        disk_id = int(disk_id)
        if disk_id in self._disks:
            raise DomainError(f"disk {disk_id} is already live")
        if not r > 0:
            raise DomainError(f"disk radius must be > 0, got {r}")
        self._disks[disk_id] = (exact_scalar(x), exact_scalar(y), exact_scalar(r))
        self._blocks.append(self._make_block([disk_id]))
        while len(self._blocks) >= 2 and self._blocks[-2].index.size <= self._blocks[-1].index.size:
            last, prev = self._blocks[-1], self._blocks[-2]
            merged = self._drop_block(prev) + self._drop_block(last)
            self._blocks.append(self._make_block(merged))

    def delete(self, disk_id: int):
        disk_id = int(disk_id)
        if disk_id not in self._disks:
            raise DomainError(f"disk {disk_id} is not live")
        block = self._owner.pop(disk_id)
        block.alive[block.slot[disk_id]] = False
        del self._disks[disk_id]
        if block.live == 0:
            self._drop_block(block)
        dead = self._stored - len(self._disks)
        if self._stored and dead >= self.rebuild_fraction * self._stored:
            self._rebuild()

    def _rebuild(self):
        live = self.live_ids()
        self._blocks = []
        self._owner = {}
        self._stored = 0
        self.rebuilds += 1
        start = 0
        for bit in reversed(range(len(live).bit_length())):
            width = 1 << bit
            if len(live) & width:
                self._blocks.append(self._make_block(live[start : start + width]))
                start += width
        logger.debug(f"dynamic index rebuilt: {len(live)} live disks in {len(self._blocks)} blocks")

    def query(self, x, y) -> Optional[int]:
        """Id of some live disk holding (x, y), or None."""
        for block in self._blocks:
            hit = block.index.containing(x, y, active=block.alive)
            if hit is not None:
                return hit
        return None

    def blocks(self) -> Iterator[StaticMembershipIndex]:
        for block in self._blocks:
            yield block.index


def dyn_insert(d: DynamicMembershipIndex, disk_id: int, disk: Disk):
    (x, y), r = disk
    d.insert(disk_id, x, y, r)


def dyn_delete(d: DynamicMembershipIndex, disk_id: int):
    d.delete(disk_id)


def dyn_query(d: DynamicMembershipIndex, x: Point) -> Optional[int]:
    return d.query(x[0], x[1])
