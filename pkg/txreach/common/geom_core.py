import hashlib
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from logging import Logger
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .errors import DomainError, FormatError

logger: Logger = logging.getLogger(__name__)

Point = Tuple[float, float]
Number = Union[int, float, str, Decimal]
Scalar = Union[int, float]

# integers below this magnitude are held as int64: squared distances between them stay below 2**63
INT64_LIMIT = 2**30
# largest magnitude at which an integral float64 is still the integer it prints as
FLOAT_EXACT_LIMIT = 2**53

_SQRT_HALF = math.sqrt(0.5)
# exact boundary directions for multiples of pi/4
_OCTANT_DIRECTIONS = [
    (1.0, 0.0),
    (_SQRT_HALF, _SQRT_HALF),
    (0.0, 1.0),
    (-_SQRT_HALF, _SQRT_HALF),
    (-1.0, 0.0),
    (-_SQRT_HALF, -_SQRT_HALF),
    (0.0, -1.0),
    (_SQRT_HALF, -_SQRT_HALF),
]
# the same directions scaled to integers, for sign tests on integer offsets
_OCTANT_STEPS = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


# exact arithmetic


def _is_integral(v) -> bool:
    if isinstance(v, (bool, np.bool_)):
        return False
    if isinstance(v, (int, np.integer)):
        return True
    if isinstance(v, Decimal):
        return v.is_finite() and v == v.to_integral_value()
    if isinstance(v, (float, np.floating)):
        return math.isfinite(v) and float(v).is_integer() and abs(v) <= FLOAT_EXACT_LIMIT
    return False


def exact_scalar(v) -> Scalar:
    """Python int for integral values (numpy scalars, Decimals and integral floats included), float otherwise."""
    if _is_integral(v):
        return int(v)
    return float(v)


def _object_array(values: Sequence[int]) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    out[:] = list(values)
    return out


def exact_columns(*columns) -> Tuple[np.ndarray, ...]:
    """
    Arrays for predicate arithmetic, one representation for all columns: int64 when every
    value is an integer of magnitude below INT64_LIMIT, Python ints (object dtype) for larger
    integers, float64 as soon as one value is not an integer.

    Parameters:
    - columns: sequences or arrays of equal meaning (x, y, r, ...), any numeric type.
    """
    arrays = [c if isinstance(c, np.ndarray) else None for c in columns]
    if all(a is not None and a.dtype.kind in "iu" for a in arrays):
        if all(len(a) == 0 or (int(a.min()) > -INT64_LIMIT and int(a.max()) < INT64_LIMIT) for a in arrays):
            return tuple(a.astype(np.int64) for a in arrays)
    if all(a is not None and a.dtype.kind == "f" for a in arrays):
        floats = [a.astype(np.float64) for a in arrays]
        integral = all(
            len(f) == 0
            or (np.all(np.isfinite(f)) and np.all(f == np.trunc(f)) and np.abs(f).max() <= FLOAT_EXACT_LIMIT)
            for f in floats
        )
        if not integral:
            return tuple(floats)
        if all(len(f) == 0 or np.abs(f).max() < INT64_LIMIT for f in floats):
            return tuple(f.astype(np.int64) for f in floats)

    values = [c.tolist() if isinstance(c, np.ndarray) else list(c) for c in columns]
    if not all(_is_integral(v) for col in values for v in col):
        return tuple(np.array([float(v) for v in col], dtype=np.float64) for col in values)
    ints = [[int(v) for v in col] for col in values]
    if all(abs(v) < INT64_LIMIT for col in ints for v in col):
        return tuple(np.array(col, dtype=np.int64) for col in ints)
    return tuple(_object_array(col) for col in ints)


def power_values(cx: np.ndarray, cy: np.ndarray, rr, x, y) -> np.ndarray:
    """
    |(x, y) c|^2 - r^2 for every disk; `rr` holds r^2 (array or scalar). Exact whenever the
    disk arrays come from `exact_columns` as integers and the point is integral.
    """
    x, y = exact_scalar(x), exact_scalar(y)
    if np.ndim(rr) == 0:
        rr = exact_scalar(rr)
    if cx.dtype == np.int64 and isinstance(x, int) and isinstance(y, int):
        if max(abs(x), abs(y)) >= INT64_LIMIT:
            cx, cy = cx.astype(object), cy.astype(object)
            rr = rr.astype(object) if isinstance(rr, np.ndarray) else rr
    dx = x - cx
    dy = y - cy
    return (dx * dx + dy * dy) - rr


def holds(powers: np.ndarray) -> np.ndarray:
    """Boolean mask of non-positive powers, whatever the array's dtype."""
    return np.asarray(powers <= 0, dtype=bool)


class WeightedPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float
    r: float

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError(f"coordinate must be finite, got {v}")
        return v

    @field_validator("r")
    @classmethod
    def _positive_radius(cls, v: float) -> float:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"radius must be finite and > 0, got {v}")
        return v


@dataclass(frozen=True)
class TransmissionInstance:
    """
    Radius-weighted point set; the implicit directed graph has p -> q iff |pq| <= r_p.

    `xs`, `ys`, `rs` are float64 copies used for geometry (cones, cells, separators).
    Predicates run on `ex`, `ey`, `er`, which hold the values exactly whenever they are all
    integers (see `exact_columns`). Instances loaded from decimal text are scaled by `scale`
    (a power of ten) so that every stored value is an integer.
    """

    xs: np.ndarray
    ys: np.ndarray
    rs: np.ndarray
    scale: int = 1
    digits: Optional[int] = None
    ex: np.ndarray = field(init=False, repr=False, compare=False)
    ey: np.ndarray = field(init=False, repr=False, compare=False)
    er: np.ndarray = field(init=False, repr=False, compare=False)
    err: np.ndarray = field(init=False, repr=False, compare=False)
    _psi: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        columns = [self.xs, self.ys, self.rs]
        if not (len(columns[0]) == len(columns[1]) == len(columns[2])):
            raise DomainError("xs, ys and rs must have the same length")
        exact = exact_columns(*columns)
        for name, arr in zip(("ex", "ey", "er"), exact):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name, arr in zip(("xs", "ys", "rs"), exact):
            arr = np.ascontiguousarray(arr.astype(np.float64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        err = self.er * self.er
        err.setflags(write=False)
        object.__setattr__(self, "err", err)

        if len(self.rs):
            if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))):
                raise DomainError("coordinates must be finite")
            bad = np.flatnonzero(~(np.isfinite(self.rs) & np.asarray(self.er > 0, dtype=bool)))
            if len(bad):
                raise DomainError(f"radius of point {int(bad[0])} must be > 0, got {self.er[bad[0]]}")
            if self.ex.dtype == object:
                distinct = len(set(zip(self.ex.tolist(), self.ey.tolist())))
            else:
                distinct = len(np.unique(np.stack([self.ex, self.ey], axis=1), axis=0))
            if distinct != len(self.ex):
                raise DomainError("duplicate coordinates are not allowed")
            psi = float(self.er.max() / self.er.min())
        else:
            psi = 1.0
        object.__setattr__(self, "_psi", psi)

    # construction

    @classmethod
    def from_points(cls, rows: Iterable[Sequence[Number]]) -> "TransmissionInstance":
        """Integral values (ints, integral floats) are kept exact; anything else is read as a float."""
        rows = [tuple(row) for row in rows]
        if any(len(row) != 3 for row in rows):
            raise DomainError("every point needs exactly (x, y, r)")
        try:
            columns = [[exact_scalar(v) for v in col] for col in zip(*rows)] if rows else [[], [], []]
        except (TypeError, ValueError):
            raise DomainError(f"points must be numeric, got {rows!r}")
        return cls(xs=columns[0], ys=columns[1], rs=columns[2])

    @classmethod
    def from_decimal_rows(cls, rows: Iterable[Sequence[Number]]) -> "TransmissionInstance":
        """
        Build an instance from decimal values, scaling everything by 10**digits so the
        stored coordinates and radii are integers.

        Parameters:
        - rows (Iterable): (x, y, r) triples given as strings, Decimals or ints.
        """
        parsed: List[Tuple[Decimal, Decimal, Decimal]] = []
        digits = 0
        for lineno, row in enumerate(rows):
            if len(row) != 3:
                raise FormatError(f"point {lineno}: expected 'x y r', got {row!r}")
            try:
                values = tuple(Decimal(str(v)) for v in row)
            except InvalidOperation:
                raise FormatError(f"point {lineno}: not a decimal number in {row!r}")
            for v in values:
                if not v.is_finite():
                    raise FormatError(f"point {lineno}: non-finite value {v}")
                digits = max(digits, -v.as_tuple().exponent)
            parsed.append(values)

        scale = 10**digits
        columns = [[int(row[i] * scale) for row in parsed] for i in range(3)]
        largest = max((abs(v) for col in columns for v in col), default=0)
        if largest >= INT64_LIMIT:
            logger.debug(f"scaled values reach {largest}; predicates run on Python integers")
        return cls(xs=columns[0], ys=columns[1], rs=columns[2], scale=scale, digits=digits)

    # accessors

    @property
    def n(self) -> int:
        return len(self.rs)

    def __len__(self) -> int:
        return self.n

    @property
    def psi(self) -> float:
        return self._psi

    @property
    def exact(self) -> bool:
        """True when predicates are decided in integer arithmetic."""
        return self.er.dtype != np.float64

    @property
    def points(self) -> List[WeightedPoint]:
        return [self.point(i) for i in range(self.n)]

    def point(self, i: int) -> WeightedPoint:
        self.check_id(i)
        return WeightedPoint(id=i, x=self.xs[i], y=self.ys[i], r=self.rs[i])

    def coords(self, i: int) -> Point:
        return (float(self.xs[i]), float(self.ys[i]))

    def exact_coords(self, i: int) -> Tuple[Scalar, Scalar]:
        return (exact_scalar(self.ex[i]), exact_scalar(self.ey[i]))

    def exact_row(self, i: int) -> Tuple[Scalar, Scalar, Scalar]:
        return (exact_scalar(self.ex[i]), exact_scalar(self.ey[i]), exact_scalar(self.er[i]))

    def check_id(self, i) -> int:
        if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
            raise DomainError(f"point id must be an integer, got {i!r}")
        if not 0 <= i < self.n:
            raise DomainError(f"point id {i} out of range [0, {self.n})")
        return int(i)

    def subset(self, ids: Sequence[int]) -> "TransmissionInstance":
        """Induced sub-instance; point j of the result is point ids[j] of self."""
        ids = np.asarray(ids, dtype=np.int64)
        return TransmissionInstance(
            xs=self.ex[ids], ys=self.ey[ids], rs=self.er[ids], scale=self.scale, digits=self.digits
        )

    def radius_order(self, ids: Optional[Sequence[int]] = None) -> np.ndarray:
        """`ids` (all points by default) sorted by (r, id), comparing exact radii."""
        ids = np.arange(self.n) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.er.dtype == object:
            return np.array(sorted(ids.tolist(), key=lambda p: (self.er[p], p)), dtype=np.int64)
        return ids[np.lexsort((ids, self.er[ids]))]

    def decimal_rows(self) -> List[Tuple[str, str, str]]:
        """Canonical text rows in the units the instance was loaded from."""
        columns = zip(self.ex.tolist(), self.ey.tolist(), self.er.tolist())
        if self.digits is None:
            text = str if self.exact else lambda v: repr(float(v))
            return [(text(x), text(y), text(r)) for x, y, r in columns]
        quantum = Decimal(1).scaleb(-self.digits)
        scale = Decimal(self.scale)

        def fmt(v: int) -> str:
            return str((Decimal(int(v)) / scale).quantize(quantum))

        return [(fmt(x), fmt(y), fmt(r)) for x, y, r in columns]

    def content_hash(self) -> bytes:
        hash_object = hashlib.sha256()
        hash_object.update(f"{self.n}\n".encode("utf-8"))
        for row in self.decimal_rows():
            hash_object.update((" ".join(row) + "\n").encode("utf-8"))
        return hash_object.digest()


# predicates


def power_distance(x: float, y: float, cx: float, cy: float, r: float) -> Scalar:
    """|x c|^2 - r^2; <= 0 iff (x, y) lies in the disk. Exact on integral inputs."""
    values = [exact_scalar(v) for v in (x, y, cx, cy, r)]
    if not all(isinstance(v, int) for v in values):
        values = [float(v) for v in values]
    x, y, cx, cy, r = values
    dx = x - cx
    dy = y - cy
    return (dx * dx + dy * dy) - r * r


def disk_contains(cx: float, cy: float, r: float, x: float, y: float) -> bool:
    return power_distance(x, y, cx, cy, r) <= 0


def edge_exists(inst: TransmissionInstance, p: int, q: int) -> bool:
    """True iff |pq| <= r_p (boundary inclusive), decided on squared values."""
    p = inst.check_id(p)
    q = inst.check_id(q)
    if p == q:
        raise DomainError(f"edge_exists needs two distinct points, got {p} twice")
    return bool(disk_contains(*inst.exact_row(p), *inst.exact_coords(q)))


def disks_holding(inst: TransmissionInstance, x, ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask over `ids` (all points by default) of the disks D_q holding the point x."""
    sel = slice(None) if ids is None else np.asarray(ids, dtype=np.int64)
    return holds(power_values(inst.ex[sel], inst.ey[sel], inst.err[sel], x[0], x[1]))


def reach_mask(inst: TransmissionInstance, p: int, ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask over `ids` (all points by default) of the q with |pq| <= r_p; p itself included."""
    sel = slice(None) if ids is None else np.asarray(ids, dtype=np.int64)
    x, y = inst.exact_coords(p)
    return holds(power_values(inst.ex[sel], inst.ey[sel], inst.err[p], x, y))


# cones


def _check_k(k: int) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 3:
        raise DomainError(f"cone count must be an integer >= 3, got {k!r}")
    return int(k)


def check_spanner_k(k: int) -> int:
    k = _check_k(k)
    if k <= 8:
        raise DomainError(f"spanner cone count must be > 8, got {k}")
    return k


def boundary_direction(k: int, c: int) -> Point:
    """Unit vector of the lower boundary ray of cone c (angle 2*pi*c/k)."""
    c %= k
    if (8 * c) % k == 0:
        return _OCTANT_DIRECTIONS[(8 * c) // k]
    angle = 2.0 * math.pi * c / k
    return (math.cos(angle), math.sin(angle))


def boundary_directions(k: int) -> Tuple[np.ndarray, np.ndarray]:
    dirs = [boundary_direction(k, c) for c in range(k)]
    return np.array([d[0] for d in dirs]), np.array([d[1] for d in dirs])


def proj(k: int, c: int, x: float, y: float) -> float:
    """Signed distance of (x, y) from the line of boundary ray c (cross product u_c x (x, y))."""
    ux, uy = boundary_direction(k, c)
    return ux * y - uy * x


def cone_projections(k: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """proj for every boundary ray; shape (k, n). Identical float results to `proj`."""
    ux, uy = boundary_directions(k)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    return ux[:, None] * ys[None, :] - uy[:, None] * xs[None, :]


def cone_key(k: int, c: int, x: float, y: float) -> float:
    """Positive multiple of the bisector projection of (x, y) for cone c."""
    return proj(k, c, x, y) - proj(k, c + 1, x, y)


def left_of_boundary(k: int, c: int, dx, dy):
    """
    u_c x (dx, dy) >= 0 for an offset from the apex, scalar or array. Octant boundaries are
    decided on integer multiples of the direction, so integral offsets are classified exactly.
    """
    c %= k
    if (8 * c) % k == 0:
        a, b = _OCTANT_STEPS[(8 * c) // k]
        return a * dy - b * dx >= 0
    ux, uy = boundary_direction(k, c)
    if isinstance(dx, np.ndarray):
        return ux * dy.astype(np.float64) - uy * dx.astype(np.float64) >= 0
    return ux * float(dy) - uy * float(dx) >= 0


def _offset(apex, q) -> Tuple[Scalar, Scalar]:
    ax, ay = exact_scalar(apex[0]), exact_scalar(apex[1])
    return exact_scalar(q[0]) - ax, exact_scalar(q[1]) - ay


def cone_of(k: int, apex, q) -> int:
    """
    Index c of the cone at `apex` holding `q`: angle(q - apex) in [2*pi*c/k, 2*pi*(c+1)/k).

    Membership is decided on the offset q - apex, computed exactly for integral inputs,
    against each boundary line; lower boundary rays belong to their cone.
    """
    k = _check_k(k)
    dx, dy = _offset(apex, q)
    if dx == 0 and dy == 0:
        raise DomainError(f"q coincides with the apex {apex}; it lies in no cone")
    above = [bool(left_of_boundary(k, c, dx, dy)) for c in range(k)]
    for c in range(k):
        if above[c] and not above[(c + 1) % k]:
            return c
    # only reachable when the offset vanishes against float rounding of an irrational boundary
    angle = math.atan2(float(dy), float(dx)) % (2.0 * math.pi)
    logger.warning(f"cone_of fell back to atan2 for apex={apex} q={q}")
    return min(int(angle * k / (2.0 * math.pi)), k - 1)


def cone_indices(k: int, apex, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorised cone_of for many points (apex itself gets -1). Pass exact arrays for exact offsets."""
    ax, ay = exact_scalar(apex[0]), exact_scalar(apex[1])
    dx = np.asarray(xs) - ax
    dy = np.asarray(ys) - ay
    above = np.array([np.asarray(left_of_boundary(k, c, dx, dy), dtype=bool) for c in range(k)]).reshape(k, -1)
    starts = above & ~np.roll(above, -1, axis=0)
    found = starts.any(axis=0)
    result = np.where(found, starts.argmax(axis=0), -1)
    degenerate = ~found & ~(np.asarray(dx == 0, dtype=bool) & np.asarray(dy == 0, dtype=bool))
    for i in np.flatnonzero(degenerate):
        result[i] = cone_of(k, (ax, ay), (xs[i], ys[i]))
    return result


def bisector_distance(k: int, apex, q) -> float:
    """d_F(apex, q): length of the projection of q - apex onto the bisector of q's cone."""
    c = cone_of(k, apex, q)
    dx, dy = _offset(apex, q)
    mid = 2.0 * math.pi * (c + 0.5) / k
    return float(dx) * math.cos(mid) + float(dy) * math.sin(mid)


def key_to_bisector_scale(k: int) -> float:
    """d_F(p, q) == (cone_key(q) - cone_key(p)) * key_to_bisector_scale(k)."""
    return 1.0 / (2.0 * math.sin(math.pi / k))


class ConeFrame(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    index: int

    @field_validator("k")
    @classmethod
    def _k(cls, v: int) -> int:
        if v <= 8:
            raise ValueError(f"cone count must be > 8, got {v}")
        return v

    @property
    def lower_angle(self) -> float:
        return 2.0 * math.pi * self.index / self.k

    @property
    def upper_angle(self) -> float:
        return 2.0 * math.pi * (self.index + 1) / self.k

    @property
    def bisector(self) -> Point:
        mid = 0.5 * (self.lower_angle + self.upper_angle)
        return (math.cos(mid), math.sin(mid))

    def contains(self, apex, q) -> bool:
        dx, dy = _offset(apex, q)
        if dx == 0 and dy == 0:
            return False
        return cone_of(self.k, apex, q) == self.index
