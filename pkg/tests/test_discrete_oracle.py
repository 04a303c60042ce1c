import numpy as np
import pytest

from txreach.common.discrete_oracle import build_chain_indices, build_discrete_oracle, query
from txreach.common.errors import DomainError
from txreach.common.geom_core import TransmissionInstance
from txreach.common.reference import brute_chain_indices, closure
from txreach.common.spanner import build_spanner

from .conftest import ACCEPTANCE_DISTRIBUTIONS, A, B, C, P1, P3, acceptance_instances


def test_fixture_a(fixture_a):
    oracle = build_discrete_oracle(fixture_a)
    assert query(oracle, C, A)
    assert not query(oracle, A, C)
    assert oracle.query(A, B) and oracle.query(B, A)
    assert not oracle.query(B, C)
    assert oracle.query(C, C)
    assert oracle.query_many([(C, A), (A, C), (B, B)]).tolist() == [True, False, True]


def test_invalid_ids(fixture_a):
    oracle = build_discrete_oracle(fixture_a)
    with pytest.raises(DomainError):
        oracle.query(A, 3)
    with pytest.raises(DomainError):
        oracle.query(-1, A)
    with pytest.raises(DomainError):
        oracle.query_many([(A, B), (B, 7)])


def test_chain_indices_fixture_b(fixture_b):
    table = build_chain_indices(fixture_b, build_spanner(fixture_b, 12), [(0, 1, 2)])
    assert table.chain_count == 1
    assert table.lengths.tolist() == [3]
    assert table.i[0, P1] == 3 and table.j[0, P1] == 1
    assert table.i[0, P3] == 3 and table.j[0, P3] == 1


def test_chain_index_sentinels():
    inst = TransmissionInstance.from_points([(0, 0, 1), (1, 0, 2), (2, 0, 4), (100, 0, 1)])
    table = build_chain_indices(inst, build_spanner(inst, 12), [(0, 1, 2)])
    assert table.i[0, 3] == 0
    assert table.j[0, 3] == 4


def test_stats(fixture_b):
    stats = build_discrete_oracle(fixture_b).stats()
    assert stats["n"] == 3
    assert stats["chain_count"] == 1
    assert stats["chain_points"] == 3
    assert stats["remaining"] == 0


@pytest.mark.parametrize("distribution", ["uniform", "clustered", "thick-adversarial"])
def test_matches_closure(make_instance, distribution):
    inst = make_instance(150, seed=3, distribution=distribution)
    oracle = build_discrete_oracle(inst)
    reach = closure(inst)
    pairs = [(p, q) for p in range(inst.n) for q in range(inst.n)]
    answers = oracle.query_many(pairs).reshape(inst.n, inst.n)
    assert np.array_equal(answers, reach.bits)

    rng = np.random.default_rng(0)
    for p, q in rng.integers(0, inst.n, size=(200, 2)):
        assert oracle.query(int(p), int(q)) == reach.reaches(int(p), int(q))


def test_tables_match_closure(make_instance):
    inst = make_instance(250, seed=5, distribution="thick-adversarial")
    oracle = build_discrete_oracle(inst)
    assert oracle.table.chain_count > 0
    reach = closure(inst)
    for c, chain in enumerate(oracle.decomposition.chains):
        i_row, j_row = brute_chain_indices(inst, chain, reach=reach)
        assert np.array_equal(oracle.table.i[c], i_row)
        assert np.array_equal(oracle.table.j[c], j_row)


@pytest.mark.slow
@pytest.mark.parametrize("distribution, psi", ACCEPTANCE_DISTRIBUTIONS)
def test_matches_closure_on_every_pair(distribution, psi):
    for seed, inst in acceptance_instances(distribution, psi, seeds=50):
        oracle = build_discrete_oracle(inst)
        pairs = [(p, q) for p in range(inst.n) for q in range(inst.n)]
        answers = oracle.query_many(pairs).reshape(inst.n, inst.n)
        assert np.array_equal(answers, closure(inst).bits), (distribution, seed, inst.n)
