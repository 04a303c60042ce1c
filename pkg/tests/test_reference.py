import numpy as np
import pytest

from txreach.common.errors import DomainError
from txreach.common.geom_core import TransmissionInstance
from txreach.common.reference import (
    brute_chain_indices,
    brute_continuous,
    brute_stretch,
    closure,
    explicit_bfs_depths,
    explicit_graph,
)
from txreach.common.spanner import build_spanner

from .conftest import A, B, C


def test_explicit_graph_fixture_a(fixture_a):
    assert explicit_graph(fixture_a) == [[B], [A], [B]]
    assert explicit_bfs_depths(fixture_a, C).tolist() == [2, 1, 0]
    assert explicit_bfs_depths(fixture_a, A).tolist() == [0, 1, -1]


def test_closure_fixture_a(fixture_a):
    reach = closure(fixture_a)
    assert reach.n == 3
    assert reach.row(A).tolist() == [A, B]
    assert reach.row(B).tolist() == [A, B]
    assert reach.row(C).tolist() == [A, B, C]
    assert reach.reaches(C, A) and not reach.reaches(A, C)


def test_closure_guard(fixture_a, monkeypatch):
    from txreach.settings import app_settings

    monkeypatch.setattr(app_settings, "closure_max_n", 2)
    with pytest.raises(DomainError):
        closure(fixture_a)
    assert closure(fixture_a, force=True).n == 3


def test_empty_instance():
    empty = TransmissionInstance.from_points([])
    assert explicit_graph(empty) == []
    assert closure(empty).bits.shape == (0, 0)


def test_closure_is_transitive(make_instance):
    inst = make_instance(150, seed=6, distribution="clustered")
    bits = closure(inst).bits
    assert bits.diagonal().all()
    squared = (bits.astype(np.int64) @ bits.astype(np.int64)) > 0
    assert np.array_equal(squared, bits)


def test_brute_continuous(fixture_a):
    reach = closure(fixture_a)
    assert not brute_continuous(fixture_a, A, (3.5, 0), reach=reach)
    assert brute_continuous(fixture_a, C, (3.5, 0), reach=reach)
    assert brute_continuous(fixture_a, C, (-1.5, 0))
    with pytest.raises(DomainError):
        brute_continuous(fixture_a, 5, (0, 0))


def test_brute_stretch_fixture_a(fixture_a):
    assert brute_stretch(fixture_a, build_spanner(fixture_a, 12)) == pytest.approx(1.0)


def test_brute_chain_indices_fixture_b(fixture_b):
    i_row, j_row = brute_chain_indices(fixture_b, (0, 1, 2))
    assert i_row.tolist() == [3, 3, 3]
    assert j_row.tolist() == [1, 1, 1]


def test_brute_chain_indices_sentinels(fixture_a):
    # chain (b, c): nothing reaches c but c itself, and a never reaches c
    i_row, j_row = brute_chain_indices(fixture_a, (B, C))
    assert i_row.tolist() == [1, 1, 2]
    assert j_row.tolist() == [1, 1, 2]
    i_row, j_row = brute_chain_indices(fixture_a, (C,))
    assert i_row.tolist() == [0, 0, 1]
    assert j_row.tolist() == [1, 1, 1]
