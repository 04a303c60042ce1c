import logging
import math
from dataclasses import dataclass, field
from logging import Logger
from typing import Dict, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from tqdm import tqdm

from ..settings import app_settings
from .errors import DomainError
from .geom_core import TransmissionInstance, check_spanner_k, cone_projections, disks_holding
from .membership_index import OrderedMembershipTree

logger: Logger = logging.getLogger(__name__)

Span = Tuple[int, int]
Builder = Literal["auto", "naive", "range_tree"]


def stretch_factor(k: int) -> float:
    return math.tan(math.pi / 4 + 2 * math.pi / k)


@dataclass(frozen=True, eq=False)
class SpannerGraph:
    """
    Directed spanner of a transmission graph. `edges` holds (src, dst) pairs sorted
    lexicographically; `forward` and `reverse` are CSR matrices weighted by Euclidean
    length in instance units.
    """

    k: int
    n: int
    edges: np.ndarray
    weights: np.ndarray
    forward: csr_matrix = field(init=False, repr=False)
    reverse: csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        src, dst = edges[:, 0], edges[:, 1]
        shape = (self.n, self.n)
        object.__setattr__(self, "forward", csr_matrix((self.weights, (src, dst)), shape=shape))
        object.__setattr__(self, "reverse", csr_matrix((self.weights, (dst, src)), shape=shape))

    @classmethod
    def from_edges(cls, inst: TransmissionInstance, k: int, pairs: Sequence[Tuple[int, int]]) -> "SpannerGraph":
        edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            edges = np.unique(edges, axis=0)
        src, dst = edges[:, 0], edges[:, 1]
        weights = np.hypot(inst.xs[src] - inst.xs[dst], inst.ys[src] - inst.ys[dst])
        return cls(k=k, n=inst.n, edges=edges, weights=weights)

    @property
    def stretch(self) -> float:
        return stretch_factor(self.k)

    def __len__(self) -> int:
        return len(self.edges)

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.forward.indices[self.forward.indptr[u] : self.forward.indptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        return self.reverse.indices[self.reverse.indptr[u] : self.reverse.indptr[u + 1]]

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(int(s), int(d)) for s, d in self.edges}

    def dump(self) -> str:
        return "".join(f"{s} {d}\n" for s, d in self.edges)


# naive reference


def build_spanner_naive(inst: TransmissionInstance, k: int, *, progress: Optional[bool] = None) -> SpannerGraph:
    """
    For every point p and cone c, the in-neighbour q of p in cone c minimizing
    (cone key, id) contributes the edge q -> p. O(k n^2), vectorised per point.
    """
    k = check_spanner_k(k)
    progress = app_settings.progress if progress is None else progress
    proj = cone_projections(k, inst.xs, inst.ys)
    keys = proj - np.roll(proj, -1, axis=0)

    pairs: List[Tuple[int, int]] = []
    for p in tqdm(range(inst.n), disable=not progress, desc="naive spanner"):
        inn = np.flatnonzero(disks_holding(inst, inst.exact_coords(p)))
        inn = inn[inn != p]
        if not len(inn):
            continue
        above = proj[:, inn] >= proj[:, p : p + 1]
        starts = above & ~np.roll(above, -1, axis=0)
        for c in np.flatnonzero(starts.any(axis=1)):
            cand = inn[starts[c]]
            cand_keys = keys[c, cand]
            pairs.append((int(cand[cand_keys == cand_keys.min()].min()), p))
    return SpannerGraph.from_edges(inst, k, pairs)


# grid-like range tree


def _decompose(n: int, qlo: int, qhi: int) -> List[Span]:
    """Canonical nodes of the implicit tree over [0, n) covering [qlo, qhi), left to right."""
    out: List[Span] = []

    def visit(lo: int, hi: int):
        if qhi <= lo or hi <= qlo or lo >= hi:
            return
        if qlo <= lo and hi <= qhi:
            out.append((lo, hi))
            return
        mid = (lo + hi) // 2
        visit(lo, mid)
        visit(mid, hi)

    visit(0, n)
    return out


@dataclass
class GridCell:
    """Cell B(row, column): first-level node `alpha` intersected with a second-level node."""

    row: int
    column: int
    alpha: Span = (0, 0)
    lo: int = 0
    hi: int = 0
    useful: bool = False

    @property
    def size(self) -> int:
        return self.hi - self.lo


class GridLikeRangeTree:
    """
    Range structure for one cone c. Level one is an implicit tree over points sorted by
    (proj_c, id); level two is the global implicit tree over (proj_{c+1}, id) restricted to
    each level-one node with single-child chains collapsed; level three, per cell, is an
    OrderedMembershipTree in (cone key, id) order. Cells narrower than `scan_max` are
    answered by scanning.
    """

    def __init__(
        self,
        inst: TransmissionInstance,
        k: int,
        c: int,
        *,
        proj: Optional[np.ndarray] = None,
        scan_max: Optional[int] = None,
    ):
        self.k = k
        self.c = c
        self.inst = inst
        self.n = inst.n
        self.scan_max = scan_max or app_settings.index_scan_max
        if proj is None:
            proj = cone_projections(k, inst.xs, inst.ys)
        self.s1 = proj[c]
        self.s2 = proj[(c + 1) % k]
        self.key = self.s1 - self.s2

        ids = np.arange(self.n)
        self.order1 = np.lexsort((ids, self.s1))
        self.order2 = np.lexsort((ids, self.s2))
        self.rank2 = np.empty(self.n, dtype=np.int64)
        self.rank2[self.order2] = ids
        self.s1_sorted = self.s1[self.order1]
        self.s2_sorted = self.s2[self.order2]

        self._ranks: Dict[Span, np.ndarray] = {}
        self._ids: Dict[Span, np.ndarray] = {}
        self._cells: Dict[Tuple[Span, int, int], OrderedMembershipTree] = {}
        self._depth: Dict[Span, int] = {}
        stack = [(0, self.n)] if self.n else []
        while stack:
            lo, hi = stack.pop()
            alpha = (lo, hi)
            ranks = np.sort(self.rank2[self.order1[lo:hi]])
            self._ranks[alpha] = ranks
            self._ids[alpha] = self.order2[ranks]
            self._contract(alpha)
            if hi - lo > 1:
                mid = (lo + hi) // 2
                stack.extend([(lo, mid), (mid, hi)])

    def _contract(self, alpha: Span):
        """Walk the second-level tree restricted to alpha, collapsing single-child chains."""
        ranks = self._ranks[alpha]
        depth = 0
        stack = [(0, self.n, 0, len(ranks), 0)]
        while stack:
            lo, hi, i, j, level = stack.pop()
            if j <= i:
                continue
            split = None
            while j - i > 1:
                mid = (lo + hi) // 2
                s = i + int(np.searchsorted(ranks[i:j], mid))
                if s == i:
                    lo = mid
                elif s == j:
                    hi = mid
                else:
                    split = (mid, s)
                    break
            depth = max(depth, level)
            if j - i > self.scan_max:
                self._cells[(alpha, i, j)] = self._cell_tree(self._ids[alpha][i:j])
            if split is not None:
                mid, s = split
                stack.append((mid, hi, s, j, level + 1))
                stack.append((lo, mid, i, s, level + 1))
        self._depth[alpha] = depth

    def _cell_tree(self, members: np.ndarray) -> OrderedMembershipTree:
        members = members[np.lexsort((members, self.key[members]))]
        inst = self.inst
        return OrderedMembershipTree(
            inst.ex[members], inst.ey[members], inst.er[members], members, scan_max=self.scan_max
        )

    def depth(self) -> int:
        """Largest depth of any collapsed second-level tree."""
        return max(self._depth.values(), default=0)

    @property
    def cell_tree_count(self) -> int:
        return len(self._cells)

    def candidate_cells(self, p: int) -> List[GridCell]:
        a = int(np.searchsorted(self.s1_sorted, self.s1[p], side="left"))
        b = int(np.searchsorted(self.s2_sorted, self.s2[p], side="left"))
        rows = _decompose(self.n, a, self.n)
        cols = _decompose(self.n, 0, b)
        if not rows or not cols:
            return []
        bounds = np.array([lo for lo, _ in cols] + [cols[-1][1]])
        cells: List[GridCell] = []
        for row, alpha in enumerate(rows):
            cuts = np.searchsorted(self._ranks[alpha], bounds)
            for idx in range(len(cols)):
                i, j = int(cuts[idx]), int(cuts[idx + 1])
                if j > i:
                    cells.append(GridCell(row=row, column=len(cols) - 1 - idx, alpha=alpha, lo=i, hi=j))
        return cells

    def cell_members(self, cell: GridCell) -> np.ndarray:
        return self._ids[cell.alpha][cell.lo : cell.hi]

    def _scan_cell(self, cell: GridCell, p: int) -> np.ndarray:
        members = self.cell_members(cell)
        return members[disks_holding(self.inst, self.inst.exact_coords(p), members)]

    def cell_useful(self, cell: GridCell, p: int) -> bool:
        if cell.size <= self.scan_max:
            return len(self._scan_cell(cell, p)) > 0
        tree = self._cells[(cell.alpha, cell.lo, cell.hi)]
        return tree.span_contains(tree.root, *self.inst.exact_coords(p))

    def cell_min_key(self, cell: GridCell) -> float:
        if cell.size <= self.scan_max:
            return float(self.key[self.cell_members(cell)].min())
        return float(self.key[self._cells[(cell.alpha, cell.lo, cell.hi)].ids[0]])

    def nn_in_cell(self, cell: GridCell, p: int) -> Optional[int]:
        """Member q of the cell with q -> p minimizing (cone key, id)."""
        if cell.size <= self.scan_max:
            hits = self._scan_cell(cell, p)
            if not len(hits):
                return None
            hit_keys = self.key[hits]
            return int(hits[hit_keys == hit_keys.min()].min())
        tree = self._cells[(cell.alpha, cell.lo, cell.hi)]
        pos = tree.first_containing(*self.inst.exact_coords(p))
        return None if pos is None else int(tree.ids[pos])

    def nearest(self, p: int) -> Optional[int]:
        cells = self.candidate_cells(p)
        for cell in cells:
            cell.useful = self.cell_useful(cell, p)
        extremes = extreme_cells(cells)

        best: Optional[Tuple[float, int]] = None
        for cell in extremes:
            q = self.nn_in_cell(cell, p)
            if q is not None and (best is None or (self.key[q], q) < best):
                best = (float(self.key[q]), q)
        if best is None:
            return None

        # a dominated cell can only tie on key; its smaller id must still win
        chosen = {(cell.row, cell.column) for cell in extremes}
        for cell in cells:
            if not cell.useful or (cell.row, cell.column) in chosen:
                continue
            if self.cell_min_key(cell) == best[0]:
                q = self.nn_in_cell(cell, p)
                if q is not None and (self.key[q], q) < best:
                    best = (float(self.key[q]), q)
        return best[1]


def extreme_cells(cells: Sequence[GridCell]) -> List[GridCell]:
    """Useful cells with no useful cell on the same diagonal (row - column) in a smaller row."""
    by_diagonal: Dict[int, GridCell] = {}
    for cell in cells:
        if not cell.useful:
            continue
        diagonal = cell.row - cell.column
        current = by_diagonal.get(diagonal)
        if current is None or cell.row < current.row:
            by_diagonal[diagonal] = cell
    return sorted(by_diagonal.values(), key=lambda cell: (cell.row, cell.column))


def build_range_tree(inst: TransmissionInstance, k: int, c: int, **kwargs) -> GridLikeRangeTree:
    k = check_spanner_k(k)
    if not 0 <= c < k:
        raise DomainError(f"cone index {c} out of range [0, {k})")
    return GridLikeRangeTree(inst, k, c, **kwargs)


def candidate_cells(tree: GridLikeRangeTree, p: int) -> List[GridCell]:
    return tree.candidate_cells(tree.inst.check_id(p))


def nn_in_cell(tree: GridLikeRangeTree, cell: GridCell, p: int) -> Optional[int]:
    return tree.nn_in_cell(cell, tree.inst.check_id(p))


def build_spanner_range_tree(inst: TransmissionInstance, k: int, *, progress: Optional[bool] = None) -> SpannerGraph:
    k = check_spanner_k(k)
    progress = app_settings.progress if progress is None else progress
    proj = cone_projections(k, inst.xs, inst.ys)
    pairs: List[Tuple[int, int]] = []
    for c in tqdm(range(k), disable=not progress, desc="range-tree spanner"):
        tree = GridLikeRangeTree(inst, k, c, proj=proj)
        logger.debug(f"cone {c}: {tree.cell_tree_count} cell trees, second-level depth {tree.depth()}")
        for p in range(inst.n):
            q = tree.nearest(p)
            if q is not None:
                pairs.append((q, p))
    return SpannerGraph.from_edges(inst, k, pairs)


def build_spanner(
    inst: TransmissionInstance,
    k: Optional[int] = None,
    *,
    builder: Optional[Builder] = None,
    progress: Optional[bool] = None,
) -> SpannerGraph:
    k = check_spanner_k(app_settings.default_k if k is None else k)
    builder = builder or app_settings.spanner_builder
    match builder:
        case "naive":
            use_naive = True
        case "range_tree":
            use_naive = False
        case "auto":
            use_naive = inst.n <= app_settings.naive_spanner_max
        case _:
            raise DomainError(f"unknown spanner builder {builder!r}")

    logger.debug(f"Building spanner: n={inst.n} k={k} builder={'naive' if use_naive else 'range_tree'}")
    if use_naive:
        return build_spanner_naive(inst, k, progress=progress)
    return build_spanner_range_tree(inst, k, progress=progress)
