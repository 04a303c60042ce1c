import logging
from dataclasses import dataclass, field
from logging import Logger
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import shortest_path
from sklearn.linear_model import LinearRegression
from tqdm import tqdm

from ..settings import app_settings
from .errors import DomainError
from .geom_core import Point, TransmissionInstance
from .spanner import build_spanner

logger: Logger = logging.getLogger(__name__)

# (members, separator) -> (reaches, reached), bool matrices of shape (len(members), len(separator)):
# reaches[v, x] iff members[v] reaches separator[x] inside the subgraph induced by members,
# reached[v, x] iff separator[x] reaches members[v] there.
ReachProvider = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class SeparatingCircle:
    center: Point
    radius: float
    tol: float = 0.0

    def classify(self, xs: np.ndarray, ys: np.ndarray, rs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Boolean (inside, outside) masks; disks in neither cross the circle (tangency included)."""
        d = np.hypot(xs - self.center[0], ys - self.center[1])
        inside = d + rs < self.radius - self.tol
        outside = d - rs > self.radius + self.tol
        return inside, outside


def balance_limit(m: int) -> int:
    return -(-2 * m // 3)


def _radon_point(pts: np.ndarray) -> np.ndarray:
    lifted = np.vstack([pts.T, np.ones(len(pts))])
    weights = np.linalg.svd(lifted)[2][-1]
    positive = weights > 0
    if not positive.any() or positive.all():
        return pts.mean(axis=0)
    return (weights[positive] @ pts[positive]) / weights[positive].sum()


def approximate_centerpoint(xs: np.ndarray, ys: np.ndarray, rng: np.random.Generator, sample_size: int) -> Point:
    """Iterated Radon points over a random sample."""
    pts = np.stack([xs, ys], axis=1)
    if len(pts) > sample_size:
        pts = pts[rng.choice(len(pts), size=sample_size, replace=False)]
    while len(pts) >= 4:
        usable = len(pts) - len(pts) % 4
        groups = pts[rng.permutation(len(pts))[:usable]].reshape(-1, 4, 2)
        pts = np.array([_radon_point(group) for group in groups])
    center = pts.mean(axis=0)
    return (float(center[0]), float(center[1]))


def separate(
    xs: np.ndarray,
    ys: np.ndarray,
    rs: np.ndarray,
    *,
    rng: Optional[np.random.Generator] = None,
    quantiles: Optional[int] = None,
    sample_size: Optional[int] = None,
    retries: Optional[int] = None,
) -> Tuple[SeparatingCircle, np.ndarray, np.ndarray, np.ndarray]:
    """
    Circle splitting a disk set into inside / outside / crossing positions with each side
    holding at most ceil(2m/3) disks, preferring few crossings.

    Parameters:
    - xs, ys, rs (np.ndarray): disk centers and radii.
    - rng (np.random.Generator): source for centerpoint sampling.
    - quantiles (int): candidate radii per center, spread over the 1/3..2/3 distance quantiles.
    - sample_size (int): sample size for the approximate centerpoint.
    - retries (int): number of sampled centers tried before the fallback.

    Returns:
    - (circle, inside, outside, crossing) with positions into the input arrays.
    """
    m = len(xs)
    if m < 2:
        raise DomainError(f"a separating circle needs at least 2 disks, got {m}")
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(app_settings.seed))
    quantiles = quantiles or app_settings.separator_quantiles
    sample_size = sample_size or app_settings.separator_sample_size
    retries = app_settings.separator_retries if retries is None else retries

    extent = float(max(np.abs(xs).max(), np.abs(ys).max()) + rs.max())
    tol = 1e-9 * (1.0 + extent)
    limit = balance_limit(m)

    median = (float(np.median(xs)), float(np.median(ys)))
    centers = [median] + [approximate_centerpoint(xs, ys, rng, sample_size) for _ in range(retries)]

    best = None
    for center in centers:
        dist = np.hypot(xs - center[0], ys - center[1])
        for q in np.linspace(1.0 / 3.0, 2.0 / 3.0, quantiles):
            circle = SeparatingCircle(center=center, radius=float(np.quantile(dist, q)), tol=tol)
            inside, outside = circle.classify(xs, ys, rs)
            n_in, n_out = int(inside.sum()), int(outside.sum())
            if n_in > limit or n_out > limit:
                continue
            score = (m - n_in - n_out, abs(n_in - n_out))
            if best is None or score < best[0]:
                best = (score, circle, inside, outside)

    if best is None:
        dist = np.hypot(xs - median[0], ys - median[1])
        t = -(-m // 3)
        circle = SeparatingCircle(center=median, radius=float(np.sort(dist)[t - 1]), tol=tol)
        inside, outside = circle.classify(xs, ys, rs)
        logger.debug(f"separator fallback at m={m}: radius {circle.radius}")
    else:
        _, circle, inside, outside = best

    crossing = ~(inside | outside)
    return circle, np.flatnonzero(inside), np.flatnonzero(outside), np.flatnonzero(crossing)


def find_separating_circle(
    inst: TransmissionInstance, S: Sequence[int], **kwargs
) -> Tuple[SeparatingCircle, List[int], List[int], List[int]]:
    S = np.array(sorted(inst.check_id(p) for p in S), dtype=np.int64)
    circle, inside, outside, crossing = separate(inst.xs[S], inst.ys[S], inst.rs[S], **kwargs)
    return circle, S[inside].tolist(), S[outside].tolist(), S[crossing].tolist()


@dataclass
class SeptreeNode:
    members: np.ndarray
    separator: np.ndarray
    parent: int
    depth: int
    children: List[int] = field(default_factory=list)
    reaches: Optional[np.ndarray] = None
    reached: Optional[np.ndarray] = None
    crossings: int = 0


class SeparationTree:
    """
    Recursive circle-separator decomposition of a disk set. Vertices are positions
    0..m-1 into the disk set; `labels` maps them to caller ids (point or cell ids).

    Every node keeps, for each vertex of its subtree, packed bit rows over its separator:
    which separator vertices the vertex reaches and which ones reach it, both inside the
    subgraph induced by the subtree.
    """

    def __init__(self, labels: np.ndarray, nodes: List[SeptreeNode]):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.nodes = nodes
        self.owner = np.full(len(self.labels), -1, dtype=np.int64)
        for idx, node in enumerate(nodes):
            self.owner[node.separator] = idx

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def height(self) -> int:
        return max((node.depth for node in self.nodes), default=0)

    def local(self, label: int) -> int:
        pos = int(np.searchsorted(self.labels, label))
        if pos >= len(self.labels) or self.labels[pos] != label:
            raise DomainError(f"id {label} is not indexed by this separation tree")
        return pos

    def _lca(self, a: int, b: int) -> int:
        nodes = self.nodes
        while nodes[a].depth > nodes[b].depth:
            a = nodes[a].parent
        while nodes[b].depth > nodes[a].depth:
            b = nodes[b].parent
        while a != b:
            a, b = nodes[a].parent, nodes[b].parent
        return a

    def query_local(self, u: int, v: int) -> bool:
        if u == v:
            return True
        node_idx = self._lca(int(self.owner[u]), int(self.owner[v]))
        while node_idx >= 0:
            node = self.nodes[node_idx]
            ru = int(np.searchsorted(node.members, u))
            rv = int(np.searchsorted(node.members, v))
            if np.any(node.reaches[ru] & node.reached[rv]):
                return True
            node_idx = node.parent
        return False

    def query(self, p: int, q: int) -> bool:
        return self.query_local(self.local(p), self.local(q))

    def check_balance(self) -> List[int]:
        """Indices of internal nodes whose children exceed ceil(2m/3)."""
        bad = []
        for idx, node in enumerate(self.nodes):
            limit = balance_limit(len(node.members))
            if any(len(self.nodes[c].members) > limit for c in node.children):
                bad.append(idx)
        return bad

    def stats(self) -> Dict:
        return {
            "nodes": len(self.nodes),
            "height": self.height,
            "separator_total": int(sum(len(node.separator) for node in self.nodes)),
            "crossings": [(len(node.members), node.crossings) for node in self.nodes if node.children],
        }

    # flat array form for oracle files

    def to_arrays(self) -> Dict[str, np.ndarray]:
        nodes = self.nodes

        def offsets(parts):
            return np.cumsum([0] + [len(p) for p in parts]).astype(np.int64)

        def concat(parts, dtype):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

        members = [node.members for node in nodes]
        separators = [node.separator for node in nodes]
        reaches = [node.reaches.ravel() for node in nodes]
        reached = [node.reached.ravel() for node in nodes]
        return {
            "labels": self.labels,
            "parent": np.array([node.parent for node in nodes], dtype=np.int64),
            "depth": np.array([node.depth for node in nodes], dtype=np.int64),
            "crossings": np.array([node.crossings for node in nodes], dtype=np.int64),
            "member_offsets": offsets(members),
            "members": concat(members, np.int64),
            "separator_offsets": offsets(separators),
            "separators": concat(separators, np.int64),
            "bit_offsets": offsets(reaches),
            "reaches": concat(reaches, np.uint8),
            "reached": concat(reached, np.uint8),
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "SeparationTree":
        nodes: List[SeptreeNode] = []
        mo, so, bo = arrays["member_offsets"], arrays["separator_offsets"], arrays["bit_offsets"]
        for idx in range(len(arrays["parent"])):
            members = arrays["members"][mo[idx] : mo[idx + 1]]
            separator = arrays["separators"][so[idx] : so[idx + 1]]
            width = (len(separator) + 7) // 8
            shape = (len(members), width)
            nodes.append(
                SeptreeNode(
                    members=members,
                    separator=separator,
                    parent=int(arrays["parent"][idx]),
                    depth=int(arrays["depth"][idx]),
                    reaches=arrays["reaches"][bo[idx] : bo[idx + 1]].reshape(shape),
                    reached=arrays["reached"][bo[idx] : bo[idx + 1]].reshape(shape),
                    crossings=int(arrays["crossings"][idx]),
                )
            )
        for idx, node in enumerate(nodes):
            if node.parent >= 0:
                nodes[node.parent].children.append(idx)
        return cls(arrays["labels"], nodes)


def build_separation_tree_generic(
    xs: np.ndarray,
    ys: np.ndarray,
    rs: np.ndarray,
    reach: ReachProvider,
    *,
    labels: Optional[np.ndarray] = None,
    leaf_size: Optional[int] = None,
    seed: Optional[int] = None,
    progress: Optional[bool] = None,
    **separator_kwargs,
) -> SeparationTree:
    """
    Separate, recurse on the inside and outside parts, attach; a set of at most
    `leaf_size` disks becomes a leaf whose separator is the whole set.
    """
    m = len(xs)
    labels = np.arange(m, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    leaf_size = leaf_size or app_settings.septree_leaf_size
    seed = app_settings.seed if seed is None else seed
    progress = app_settings.progress if progress is None else progress
    rng = np.random.Generator(np.random.Philox(seed))

    nodes: List[SeptreeNode] = []
    stack: List[Tuple[np.ndarray, int, int]] = [(np.arange(m, dtype=np.int64), -1, 0)] if m else []
    with tqdm(total=m, disable=not progress, desc="separation tree") as bar:
        while stack:
            members, parent, depth = stack.pop()
            idx = len(nodes)
            if len(members) <= leaf_size:
                node = SeptreeNode(members=members, separator=members, parent=parent, depth=depth)
            else:
                _, inside, outside, crossing = separate(
                    xs[members], ys[members], rs[members], rng=rng, **separator_kwargs
                )
                node = SeptreeNode(
                    members=members, separator=members[crossing], parent=parent, depth=depth, crossings=len(crossing)
                )
                for part in (outside, inside):
                    if len(part):
                        stack.append((members[part], idx, depth + 1))
            if parent >= 0:
                nodes[parent].children.append(idx)

            reaches, reached = reach(node.members, node.separator)
            node.reaches = np.packbits(np.asarray(reaches, dtype=bool), axis=1)
            node.reached = np.packbits(np.asarray(reached, dtype=bool), axis=1)
            nodes.append(node)
            bar.update(len(node.separator))
            logger.debug(f"septree node {idx}: m={len(members)} separator={len(node.separator)} depth={depth}")

    tree = SeparationTree(labels, nodes)
    stats = tree.stats()
    logger.info(
        f"Separation tree: {stats['nodes']} nodes, height {stats['height']}, "
        f"separator total {stats['separator_total']}"
    )
    return tree


def crossing_constant(tree: SeparationTree) -> Optional[float]:
    """Least-squares c in crossings ~ c * sqrt(m) over internal nodes."""
    pairs = tree.stats()["crossings"]
    if not pairs:
        return None
    X = np.sqrt(np.array([[m] for m, _ in pairs], dtype=np.float64))
    y = np.array([c for _, c in pairs], dtype=np.float64)
    c = float(LinearRegression(fit_intercept=False).fit(X, y).coef_[0])
    if c > app_settings.crossing_constant_warn:
        logger.warning(
            f"separator crossings fit c={c:.3f} sqrt(m), above {app_settings.crossing_constant_warn:g} "
            f"over {len(pairs)} nodes"
        )
    return c


def spanner_reach_provider(inst: TransmissionInstance, ids: np.ndarray, *, k: Optional[int] = None) -> ReachProvider:
    """
    Reachability inside induced sub-instances, via a spanner of the sub-instance and
    unweighted shortest paths from the separator forward and on the reversed spanner.
    """
    k = app_settings.oracle_k if k is None else k

    def reach(members: np.ndarray, separator: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        sub = inst.subset(ids[members])
        if not len(separator):
            empty = np.zeros((len(members), 0), dtype=bool)
            return empty, empty.copy()
        spanner = build_spanner(sub, k, progress=False)
        rows = np.searchsorted(members, separator)
        from_sep = shortest_path(spanner.forward, directed=True, unweighted=True, indices=rows)
        to_sep = shortest_path(spanner.reverse, directed=True, unweighted=True, indices=rows)
        return np.isfinite(to_sep).T, np.isfinite(from_sep).T

    return reach


def build_separation_tree(
    inst: TransmissionInstance, S: Sequence[int], *, k: Optional[int] = None, **kwargs
) -> SeparationTree:
    """Separation tree over the points S, per-node reachability through k-cone spanners (k=20 by default)."""
    ids = np.array(sorted({inst.check_id(p) for p in S}), dtype=np.int64)
    logger.info(f"Building separation tree over {len(ids)} points.")
    return build_separation_tree_generic(
        inst.xs[ids],
        inst.ys[ids],
        inst.rs[ids],
        spanner_reach_provider(inst, ids, k=k),
        labels=ids,
        **kwargs,
    )


def query_septree(tree: SeparationTree, p: int, q: int) -> bool:
    return tree.query(p, q)
