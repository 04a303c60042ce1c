import math

import numpy as np
import pytest
from pydantic import ValidationError

from txreach.common.errors import DomainError, FormatError
from txreach.common.geom_core import (
    ConeFrame,
    TransmissionInstance,
    bisector_distance,
    cone_indices,
    cone_of,
    disks_holding,
    edge_exists,
    reach_mask,
)

from .conftest import A, B, C


def test_edge_exists_fixture_a(fixture_a):
    assert edge_exists(fixture_a, A, B)
    assert not edge_exists(fixture_a, A, C)
    # |cb| = 2 <= 2.5, and |ba| = 1 = r_b on the boundary
    assert edge_exists(fixture_a, C, B)
    assert edge_exists(fixture_a, B, A)


def test_edge_exists_rejects_bad_ids(fixture_a):
    with pytest.raises(DomainError):
        edge_exists(fixture_a, A, A)
    with pytest.raises(DomainError):
        edge_exists(fixture_a, A, 3)
    with pytest.raises(DomainError):
        edge_exists(fixture_a, -1, A)


@pytest.mark.parametrize(
    "q, expected",
    [((1, 1), 1), ((1, 0), 0), ((-1, 0), 4), ((0, 1), 2), ((0, -1), 6), ((1, -1), 7)],
)
def test_cone_of_eight_cones(q, expected):
    assert cone_of(8, (0, 0), q) == expected


def test_cone_of_apex_is_in_no_cone():
    with pytest.raises(DomainError):
        cone_of(12, (1, 1), (1, 1))


def test_cone_of_rejects_small_k():
    with pytest.raises(DomainError):
        cone_of(2, (0, 0), (1, 0))


@pytest.mark.parametrize("k", [9, 12, 20])
def test_rotation_increments_cone(k):
    rng = np.random.default_rng(k)
    for _ in range(50):
        apex = tuple(rng.uniform(-10, 10, 2))
        dist = rng.uniform(0.5, 5)
        c = int(rng.integers(0, k))
        angle = 2 * math.pi * (c + rng.uniform(0.1, 0.9)) / k
        for step in range(k):
            a = angle + 2 * math.pi * step / k
            q = (apex[0] + dist * math.cos(a), apex[1] + dist * math.sin(a))
            assert cone_of(k, apex, q) == (c + step) % k


def test_cone_indices_match_cone_of(make_instance):
    inst = make_instance(80, seed=3)
    for k in (9, 12):
        for p in range(0, inst.n, 7):
            found = cone_indices(k, inst.coords(p), inst.xs, inst.ys)
            assert found[p] == -1
            for q in range(inst.n):
                if q != p:
                    assert found[q] == cone_of(k, inst.coords(p), inst.coords(q))


def test_bisector_distance_examples():
    assert bisector_distance(8, (0, 0), (1, 0)) == pytest.approx(math.cos(math.pi / 8))
    mid = math.pi / 8
    assert bisector_distance(8, (0, 0), (5 * math.cos(mid), 5 * math.sin(mid))) == pytest.approx(5.0)
    assert bisector_distance(12, (0, 0), (2, 0)) == pytest.approx(1.9318517, abs=1e-7)
    with pytest.raises(DomainError):
        bisector_distance(12, (0, 0), (0, 0))


@pytest.mark.parametrize("k", [9, 12, 20])
def test_bisector_distance_bounds(k):
    rng = np.random.default_rng(100 + k)
    for _ in range(500):
        q = tuple(rng.uniform(-50, 50, 2))
        d = math.hypot(*q)
        df = bisector_distance(k, (0, 0), q)
        assert d * math.cos(math.pi / k) - 1e-9 <= df <= d + 1e-9


def test_same_cone_closer_point_is_reached(make_instance):
    """u, v -> p in one cone of p with v closer along the bisector: u -> v and |uv| < |up|."""
    k = 9
    inst = make_instance(70, seed=11, distribution="clustered")
    for p in range(inst.n):
        inn = [q for q in range(inst.n) if q != p and edge_exists(inst, q, p)]
        cones = {q: cone_of(k, inst.coords(p), inst.coords(q)) for q in inn}
        for u in inn:
            for v in inn:
                if u == v or cones[u] != cones[v]:
                    continue
                apex = inst.coords(p)
                if bisector_distance(k, apex, inst.coords(v)) < bisector_distance(k, apex, inst.coords(u)):
                    up = math.dist(inst.coords(u), inst.coords(p))
                    uv = math.dist(inst.coords(u), inst.coords(v))
                    assert edge_exists(inst, u, v)
                    assert uv < up


def test_instance_scaling_and_psi():
    inst = TransmissionInstance.from_decimal_rows([("0", "0", "2"), ("1.5", "0", "1"), ("3", "0", "2.50")])
    assert inst.scale == 100
    assert list(inst.xs) == [0, 150, 300]
    assert list(inst.rs) == [200, 100, 250]
    assert inst.psi == pytest.approx(2.5)
    assert inst.exact
    assert inst.decimal_rows()[1] == ("1.50", "0.00", "1.00")


def test_instance_rejects_invalid_points():
    with pytest.raises(DomainError):
        TransmissionInstance.from_points([(0, 0, 1), (0, 0, 2)])
    with pytest.raises(DomainError):
        TransmissionInstance.from_points([(0, 0, 0)])
    with pytest.raises(DomainError):
        TransmissionInstance.from_points([(0, 0, -1)])
    with pytest.raises(FormatError):
        TransmissionInstance.from_decimal_rows([("0", "zero", "1")])


def test_empty_and_single_instances():
    empty = TransmissionInstance.from_points([])
    assert empty.n == 0 and empty.psi == 1.0
    single = TransmissionInstance.from_points([(4, 5, 1)])
    assert single.n == 1 and single.psi == 1.0


def test_content_hash_tracks_values(fixture_a):
    same = TransmissionInstance.from_points([(0, 0, 2), (1, 0, 1), (3, 0, 2.5)])
    other = TransmissionInstance.from_points([(0, 0, 2), (1, 0, 1), (3, 0, 2.6)])
    assert fixture_a.content_hash() == same.content_hash()
    assert fixture_a.content_hash() != other.content_hash()
    assert len(fixture_a.content_hash()) == 32


def test_points_and_subset(fixture_a):
    points = fixture_a.points
    assert [p.id for p in points] == [0, 1, 2]
    assert points[2].r == 2.5
    sub = fixture_a.subset([2, 0])
    assert sub.coords(0) == (3.0, 0.0)
    assert sub.coords(1) == (0.0, 0.0)


def test_cone_frame():
    frame = ConeFrame(k=12, index=0)
    assert frame.contains((0, 0), (1, 0.1))
    assert not frame.contains((0, 0), (0, 1))
    assert not frame.contains((0, 0), (0, 0))
    assert frame.bisector == pytest.approx((math.cos(math.pi / 12), math.sin(math.pi / 12)))
    with pytest.raises(ValidationError):
        ConeFrame(k=8, index=0)


def test_edge_exists_decides_large_coordinates_exactly():
    # |pq|^2 = r^2 + 1: float64 rounds both sides to the same value
    inst = TransmissionInstance.from_points([(0, 0, 800_000_000), (799_999_999, 40_000, 1)])
    assert not edge_exists(inst, 0, 1)
    assert not edge_exists(inst, 1, 0)
    inside = TransmissionInstance.from_points([(0, 0, 800_000_000), (799_999_999, 39_999, 1)])
    assert edge_exists(inside, 0, 1)


def test_huge_integers_stay_exact():
    big = 2**62
    inst = TransmissionInstance.from_points([(big, 0, 3), (big + 3, 0, 1), (big, 2, 1)])
    assert inst.exact
    assert inst.ex.dtype == object
    assert inst.exact_coords(1) == (big + 3, 0)
    assert edge_exists(inst, 0, 1)
    assert not edge_exists(inst, 1, 0)
    assert not edge_exists(inst, 2, 1)
    assert reach_mask(inst, 0).tolist() == [True, True, True]
    assert disks_holding(inst, (big + 1, 0)).tolist() == [True, False, False]


def test_cone_of_on_huge_offsets():
    apex = (2**60, 2**60)
    assert cone_of(8, apex, (2**60 + 1, 2**60 + 1)) == 1
    assert cone_of(8, apex, (2**60 + 1, 2**60)) == 0
    assert cone_of(8, apex, (2**60, 2**60 - 1)) == 6
    assert cone_of(12, apex, (2**60 - 1, 2**60)) == 6
    with pytest.raises(DomainError):
        cone_of(8, apex, apex)
    xs = np.array([2**60 + 1, 2**60, 2**60 - 1], dtype=object)
    ys = np.array([2**60 + 1, 2**60 - 1, 2**60], dtype=object)
    assert cone_indices(8, apex, xs, ys).tolist() == [1, 6, 4]


def test_bisector_distance_on_huge_offsets():
    assert bisector_distance(8, (2**60, 0), (2**60 + 3, 0)) == pytest.approx(3 * math.cos(math.pi / 8))
    assert bisector_distance(12, (0, 2**60), (0, 2**60 + 2)) == pytest.approx(2 * math.cos(math.pi / 12))


def test_disks_holding_and_reach_mask(fixture_a):
    assert disks_holding(fixture_a, (1, 0)).tolist() == [True, True, True]
    assert disks_holding(fixture_a, (10, 0)).tolist() == [False, False, False]
    assert disks_holding(fixture_a, (1, 0), np.array([2, 0])).tolist() == [True, True]
    assert reach_mask(fixture_a, A).tolist() == [True, True, False]
    assert reach_mask(fixture_a, C, np.array([B, A])).tolist() == [True, False]


def test_radius_order(fixture_a):
    assert fixture_a.radius_order().tolist() == [B, A, C]
    assert fixture_a.radius_order([C, A]).tolist() == [A, C]
    big = TransmissionInstance.from_points([(0, 0, 2**40 + 1), (1, 0, 2**40), (2, 0, 2**40)])
    assert big.radius_order().tolist() == [1, 2, 0]
