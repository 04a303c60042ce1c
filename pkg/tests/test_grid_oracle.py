import numpy as np
import pytest

from txreach.common.geom_core import TransmissionInstance, edge_exists
from txreach.common.grid_oracle import (
    build_cell_graph,
    build_grid,
    build_grid_oracle,
    cell_graph_sparsity,
    level_count,
    query_grid,
    radius_levels,
    same_cell_pairs,
)
from txreach.common.reference import closure

from .conftest import A, B, C, P1, P3, acceptance_instances


@pytest.mark.parametrize("psi, expected", [(1, 0), (2, 1), (2.5, 2), (8, 3)])
def test_level_count(psi, expected):
    assert level_count(psi) == expected


def test_radius_levels():
    rs = np.array([1, 1.9, 2, 3.99, 4])
    assert radius_levels(rs, 1.0, 2).tolist() == [0, 0, 1, 1, 2]
    # clamped to the top level
    assert radius_levels(np.array([100.0]), 1.0, 2).tolist() == [2]


def test_cell_assignment():
    inst = TransmissionInstance.from_points([(0.9, 0.2, 1), (5, 5, 2)])
    grid = build_grid(inst)
    assert grid.L == 1
    assert grid.level.tolist() == [0, 1]
    assert (grid.cell_x[0], grid.cell_y[0]) == (1, 0)
    # a cell is strictly narrower than the smallest radius of its level
    assert grid.side(0) * np.sqrt(2) < 1.0


def test_cell_graph_fixture_b(fixture_b):
    graph = build_cell_graph(fixture_b)
    assert graph.n_cells == 3
    edges = {tuple(e) for e in graph.edges.tolist()}
    assert (int(graph.cell_of[P3]), int(graph.cell_of[P1])) in edges
    assert cell_graph_sparsity(graph) > 0


def test_fixture_a(fixture_a):
    oracle = build_grid_oracle(fixture_a)
    assert query_grid(oracle, C, A)
    assert not oracle.query(A, C)
    assert oracle.query(A, B) and oracle.query(B, A)
    assert oracle.query_many([(C, B), (B, C)]).tolist() == [True, False]
    assert oracle.stats()["cells"] == 3


def test_empty_instance():
    graph = build_cell_graph(TransmissionInstance.from_points([]))
    assert graph.n_cells == 0
    assert cell_graph_sparsity(graph) == 0.0


@pytest.mark.parametrize("psi", [2, 8, 64])
def test_matches_closure(make_instance, psi):
    inst = make_instance(150, seed=psi, distribution="bounded-psi", psi=psi)
    oracle = build_grid_oracle(inst)
    reach = closure(inst)
    for p in range(inst.n):
        for q in range(0, inst.n, 3):
            assert oracle.query(p, q) == reach.reaches(p, q), (p, q)


def test_cell_graph_properties(make_instance):
    inst = make_instance(200, seed=2, distribution="bounded-psi", psi=8)
    graph = build_cell_graph(inst)
    assert len(graph.edges)
    for a, b in graph.edges.tolist():
        assert a != b
        assert graph.cluster_overlap(a, b)
    for p, q in same_cell_pairs(graph):
        assert edge_exists(inst, p, q)
    # every cell member lies inside its cell
    for cell in range(graph.n_cells):
        x0, y0, x1, y1 = graph.cell_box(cell)
        for p in graph.cell_members(cell):
            assert x0 - 1e-6 <= inst.xs[p] <= x1 + 1e-6
            assert y0 - 1e-6 <= inst.ys[p] <= y1 + 1e-6


def cell_edges_by_definition(inst, graph):
    """Cell graph edges straight from the 9x9 cluster rule, one point and one cell at a time."""
    grid = graph.grid
    edges = set()
    for p in range(inst.n):
        here = int(graph.cell_of[p])
        for j in range(grid.L + 1):
            jx, jy = (int(v) for v in grid.cell_at(inst.xs[p], inst.ys[p], j))
            for other, (level, cx, cy) in enumerate(graph.keys.tolist()):
                if level != j or other == here or abs(cx - jx) > 4 or abs(cy - jy) > 4:
                    continue
                members = graph.cell_members(other).tolist()
                if any(edge_exists(inst, q, p) for q in members):
                    edges.add((other, here))
                if j >= grid.level[p] and any(edge_exists(inst, p, q) for q in members):
                    edges.add((here, other))
    return sorted(edges)


@pytest.mark.parametrize("psi, seed", [(2, 0), (8, 1), (64, 2)])
def test_cell_graph_edges_follow_cluster_rule(make_instance, psi, seed):
    inst = make_instance(120, seed=seed, distribution="bounded-psi", psi=psi)
    graph = build_cell_graph(inst)
    assert graph.edges.tolist() == [list(e) for e in cell_edges_by_definition(inst, graph)]


def test_cell_graph_on_large_integer_coordinates():
    offset = 2**40
    inst = TransmissionInstance.from_points(
        [(offset, offset, 3), (offset + 3, offset, 1), (offset + 40, offset, 2), (offset + 42, offset, 2)]
    )
    assert inst.ex.dtype == object
    graph = build_cell_graph(inst)
    assert graph.edges.tolist() == [list(e) for e in cell_edges_by_definition(inst, graph)]
    oracle = build_grid_oracle(inst)
    assert oracle.query(0, 1) and not oracle.query(1, 0)
    assert oracle.query(2, 3) and oracle.query(3, 2)
    assert not oracle.query(0, 2)


@pytest.mark.slow
@pytest.mark.parametrize("psi", [2, 8, 64])
def test_matches_closure_on_every_pair(psi):
    for seed, inst in acceptance_instances("bounded-psi", float(psi), seeds=20):
        oracle = build_grid_oracle(inst)
        reach = closure(inst)
        pairs = [(p, q) for p in range(inst.n) for q in range(inst.n)]
        answers = oracle.query_many(pairs).reshape(inst.n, inst.n)
        assert np.array_equal(answers, reach.bits), (psi, seed, inst.n)
