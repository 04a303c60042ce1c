import logging
import math
from dataclasses import dataclass, field
from logging import Logger
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from tqdm import tqdm

from ..settings import app_settings
from .geom_core import TransmissionInstance, holds
from .septree import ReachProvider, SeparationTree, build_separation_tree_generic

logger: Logger = logging.getLogger(__name__)

# half-width of a grid cluster (9 x 9 cells)
CLUSTER_REACH = 4
_CLUSTER_OFFSETS = np.arange(-CLUSTER_REACH, CLUSTER_REACH + 1)
# largest prober x member block compared at once
PROBE_BLOCK = 1 << 20
# associated disk radius of a level-i cell, in units of 2**i * r_min
CELL_DISK_FACTOR = 3.0
# keeps the float cell diagonal strictly below the class radius
_SIDE_SHRINK = 1.0 - 1e-12


def level_count(psi: float) -> int:
    """Smallest L with 2**L >= psi."""
    L = 0
    while 2.0**L < psi:
        L += 1
    return L


@dataclass(frozen=True, eq=False)
class HierarchicalGrid:
    rmin: float
    L: int
    level: np.ndarray
    cell_x: np.ndarray
    cell_y: np.ndarray

    def side(self, i: int) -> float:
        """Cell side at level i: diameter 2**i * r_min."""
        return (2.0**i) * self.rmin / math.sqrt(2.0) * _SIDE_SHRINK

    def cell_at(self, x, y, i: int) -> Tuple[np.ndarray, np.ndarray]:
        s = self.side(i)
        return np.floor(np.asarray(x) / s).astype(np.int64), np.floor(np.asarray(y) / s).astype(np.int64)


def radius_levels(rs: np.ndarray, rmin: float, L: int) -> np.ndarray:
    """floor(log2(r / rmin)) clamped to [0, L]."""
    _, exponent = np.frexp(rs / rmin)
    level = exponent.astype(np.int64) - 1
    level = np.where(np.ldexp(rmin, level) > rs, level - 1, level)
    level = np.where(np.ldexp(rmin, level + 1) <= rs, level + 1, level)
    return np.clip(level, 0, L)


def build_grid(inst: TransmissionInstance) -> HierarchicalGrid:
    if inst.n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return HierarchicalGrid(rmin=1.0, L=0, level=empty, cell_x=empty, cell_y=empty.copy())
    rmin = float(inst.rs.min())
    L = level_count(inst.psi)
    level = radius_levels(inst.rs, rmin, L)
    grid = HierarchicalGrid(rmin=rmin, L=L, level=level, cell_x=np.zeros(0), cell_y=np.zeros(0))
    cell_x = np.empty(inst.n, dtype=np.int64)
    cell_y = np.empty(inst.n, dtype=np.int64)
    for i in range(L + 1):
        at = level == i
        cell_x[at], cell_y[at] = grid.cell_at(inst.xs[at], inst.ys[at], i)
    return HierarchicalGrid(rmin=rmin, L=L, level=level, cell_x=cell_x, cell_y=cell_y)


@dataclass(frozen=True, eq=False)
class CellGraph:
    """Nonempty cells (sorted by level, column, row) and directed edges between them."""

    grid: HierarchicalGrid
    keys: np.ndarray
    cell_of: np.ndarray
    member_offsets: np.ndarray
    members: np.ndarray
    edges: np.ndarray
    adjacency: csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n_cells = len(self.keys)
        edges = self.edges.reshape(-1, 2)
        data = np.ones(len(edges), dtype=np.int8)
        object.__setattr__(self, "adjacency", csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n_cells, n_cells)))

    @property
    def n_cells(self) -> int:
        return len(self.keys)

    @property
    def levels(self) -> np.ndarray:
        return self.keys[:, 0]

    def cell_members(self, cell: int) -> np.ndarray:
        return self.members[self.member_offsets[cell] : self.member_offsets[cell + 1]]

    @property
    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        sides = np.array([self.grid.side(int(i)) for i in self.levels]) if self.n_cells else np.zeros(0)
        return (self.keys[:, 1] + 0.5) * sides, (self.keys[:, 2] + 0.5) * sides

    @property
    def disk_radii(self) -> np.ndarray:
        return CELL_DISK_FACTOR * np.ldexp(self.grid.rmin, self.levels)

    def cluster_box(self, cell: int) -> Tuple[float, float, float, float]:
        level, cx, cy = (int(v) for v in self.keys[cell])
        s = self.grid.side(level)
        lo, hi = -CLUSTER_REACH, CLUSTER_REACH + 1
        return ((cx + lo) * s, (cy + lo) * s, (cx + hi) * s, (cy + hi) * s)

    def cell_box(self, cell: int) -> Tuple[float, float, float, float]:
        level, cx, cy = (int(v) for v in self.keys[cell])
        s = self.grid.side(level)
        return (cx * s, cy * s, (cx + 1) * s, (cy + 1) * s)

    def cluster_overlap(self, a: int, b: int) -> bool:
        """True if the 9x9 cluster around either cell meets the other cell."""

        def meets(box1, box2) -> bool:
            return box1[0] <= box2[2] and box2[0] <= box1[2] and box1[1] <= box2[3] and box2[1] <= box1[3]

        return meets(self.cluster_box(a), self.cell_box(b)) or meets(self.cluster_box(b), self.cell_box(a))


def _probe_lookup(keys: np.ndarray, probe_x: np.ndarray, probe_y: np.ndarray) -> np.ndarray:
    """Row of `keys` (columns x, y) matching each probed (x, y), -1 where no such cell exists."""
    cells = np.stack([keys[:, 0], keys[:, 1]], axis=1)
    probes = np.stack([probe_x.ravel(), probe_y.ravel()], axis=1)
    uniq, inverse = np.unique(np.concatenate([cells, probes]), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    row_of = np.full(len(uniq), -1, dtype=np.int64)
    row_of[inverse[: len(cells)]] = np.arange(len(cells))
    return row_of[inverse[len(cells) :]].reshape(probe_x.shape)


def _probe_cell(inst: TransmissionInstance, members: np.ndarray, probers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Masks over `probers`: some member's disk holds the prober (incoming), the prober's
    disk holds some member (outgoing). Exact on integral instances.
    """
    incoming = np.zeros(len(probers), dtype=bool)
    outgoing = np.zeros(len(probers), dtype=bool)
    mx, my, mrr = inst.ex[members], inst.ey[members], inst.err[members]
    step = max(1, PROBE_BLOCK // len(members))
    for lo in range(0, len(probers), step):
        chunk = probers[lo : lo + step]
        dx = inst.ex[chunk][:, None] - mx[None, :]
        dy = inst.ey[chunk][:, None] - my[None, :]
        squared = dx * dx + dy * dy
        incoming[lo : lo + step] = holds(squared - mrr[None, :]).any(axis=1)
        outgoing[lo : lo + step] = holds(squared - inst.err[chunk][:, None]).any(axis=1)
    return incoming, outgoing


def build_cell_graph(
    inst: TransmissionInstance, grid: Optional[HierarchicalGrid] = None, *, progress: Optional[bool] = None
) -> CellGraph:
    """
    Probe, for every point p and level j, the 9x9 cluster of level-j cells around p.
    A cell holding some q with q -> p gives an incoming edge; for j >= level(p) a cell
    holding some q with p -> q gives an outgoing edge. The 81 offsets of a level are
    looked up for all points at once; probes are then grouped by the cell they hit.
    """
    progress = app_settings.progress if progress is None else progress
    grid = grid or build_grid(inst)
    n = inst.n
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return CellGraph(
            grid=grid,
            keys=np.zeros((0, 3), dtype=np.int64),
            cell_of=empty,
            member_offsets=np.zeros(1, dtype=np.int64),
            members=empty, edges=np.zeros((0, 2), dtype=np.int64),
        )

    keys, cell_of = np.unique(np.stack([grid.level, grid.cell_x, grid.cell_y], axis=1), axis=0, return_inverse=True)
    cell_of = cell_of.reshape(-1)
    members = np.argsort(cell_of, kind="stable")
    member_offsets = np.searchsorted(cell_of[members], np.arange(len(keys) + 1))

    offset_x, offset_y = (o.ravel() for o in np.meshgrid(_CLUSTER_OFFSETS, _CLUSTER_OFFSETS, indexing="ij"))
    found: List[np.ndarray] = [np.zeros((0, 2), dtype=np.int64)]
    for j in tqdm(range(grid.L + 1), disable=not progress, desc="cell graph"):
        at_level = np.flatnonzero(keys[:, 0] == j)
        if not len(at_level):
            continue
        jx, jy = grid.cell_at(inst.xs, inst.ys, j)
        hit = _probe_lookup(keys[at_level, 1:], jx[:, None] + offset_x[None, :], jy[:, None] + offset_y[None, :])
        prober, slot = np.nonzero(hit >= 0)
        target = at_level[hit[prober, slot]]
        keep = target != cell_of[prober]
        prober, target = prober[keep], target[keep]
        if not len(prober):
            continue

        order = np.argsort(target, kind="stable")
        prober, target = prober[order], target[order]
        starts = np.flatnonzero(np.r_[True, target[1:] != target[:-1]])
        for lo, hi in zip(starts, np.r_[starts[1:], len(target)]):
            other = int(target[lo])
            probers = prober[lo:hi]
            incoming, outgoing = _probe_cell(inst, members[member_offsets[other] : member_offsets[other + 1]], probers)
            outgoing &= grid.level[probers] <= j
            found.append(np.stack([np.full(int(incoming.sum()), other), cell_of[probers[incoming]]], axis=1))
            found.append(np.stack([cell_of[probers[outgoing]], np.full(int(outgoing.sum()), other)], axis=1))

    edge_array = np.unique(np.concatenate(found).astype(np.int64), axis=0).reshape(-1, 2)
    logger.info(f"Cell graph: {len(keys)} cells, {len(edge_array)} edges, L={grid.L}")
    return CellGraph(
        grid=grid, keys=keys, cell_of=cell_of, member_offsets=member_offsets, members=members, edges=edge_array
    )


def cell_reach_provider(graph: CellGraph) -> ReachProvider:
    """Reachability inside induced cell subgraphs by unweighted BFS."""

    def reach(members: np.ndarray, separator: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if not len(separator):
            empty = np.zeros((len(members), 0), dtype=bool)
            return empty, empty.copy()
        sub = graph.adjacency[members][:, members]
        rows = np.searchsorted(members, separator)
        from_sep = shortest_path(sub, directed=True, unweighted=True, indices=rows)
        to_sep = shortest_path(sub.T.tocsr(), directed=True, unweighted=True, indices=rows)
        return np.isfinite(to_sep).T, np.isfinite(from_sep).T

    return reach


class GridOracle:
    """Reachability for bounded radius ratio: points map to cells, cells are indexed by a separation tree."""

    kind = "grid"

    def __init__(
        self,
        inst: TransmissionInstance,
        cell_of: np.ndarray,
        septree: SeparationTree,
        graph: Optional[CellGraph] = None,
    ):
        self.inst = inst
        self.cell_of = np.asarray(cell_of, dtype=np.int64)
        self.septree = septree
        self.graph = graph

    def query(self, p: int, q: int) -> bool:
        p = self.inst.check_id(p)
        q = self.inst.check_id(q)
        a, b = int(self.cell_of[p]), int(self.cell_of[q])
        if a == b:
            return True
        return self.septree.query_local(a, b)

    def query_many(self, pairs) -> np.ndarray:
        return np.array([self.query(int(p), int(q)) for p, q in pairs], dtype=bool)

    def stats(self) -> Dict:
        septree = self.septree.stats()
        return {
            "n": self.inst.n,
            "cells": len(self.septree),
            "cell_edges": None if self.graph is None else len(self.graph.edges),
            "chain_count": 0,
            "septree_nodes": septree["nodes"],
            "separator_total": septree["separator_total"],
            "separator_crossings": int(sum(c for _, c in septree["crossings"])),
        }


def build_grid_oracle(inst: TransmissionInstance, *, progress: Optional[bool] = None) -> GridOracle:
    logger.info(f"Building grid oracle: n={inst.n} psi={inst.psi:.6g}")
    grid = build_grid(inst)
    graph = build_cell_graph(inst, grid, progress=progress)
    cx, cy = graph.centers
    septree = build_separation_tree_generic(
        cx, cy, graph.disk_radii, cell_reach_provider(graph), progress=progress
    )
    return GridOracle(inst, graph.cell_of, septree, graph)


def query_grid(oracle: GridOracle, p: int, q: int) -> bool:
    return oracle.query(p, q)


def cell_graph_sparsity(graph: CellGraph) -> float:
    """|E'| / (|V'| (L + 1)), the constant of the edge bound."""
    if graph.n_cells == 0:
        return 0.0
    return len(graph.edges) / (graph.n_cells * (graph.grid.L + 1))


def same_cell_pairs(graph: CellGraph) -> List[Tuple[int, int]]:
    pairs = []
    for c in range(graph.n_cells):
        m = graph.cell_members(c)
        pairs.extend((int(a), int(b)) for a in m for b in m if a != b)
    return pairs
