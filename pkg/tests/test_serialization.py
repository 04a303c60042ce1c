import struct

import numpy as np
import pytest

from txreach.cli.commands.build import build_oracle
from txreach.common.errors import DomainError, FormatError
from txreach.common.generators import generate
from txreach.common.serialization import (
    FORMAT_VERSION,
    KINDS,
    MAGIC,
    dumps_oracle,
    load_oracle,
    loads_oracle,
    read_sections,
    save_oracle,
)

SECTIONS = {
    "discrete": ["instance_hash", "meta", "chains", "index_tables", "septree_nodes", "septree_bitsets"],
    "continuous": [
        "instance_hash", "meta", "chains", "index_tables", "septree_nodes", "septree_bitsets", "membership"
    ],
    "grid": ["instance_hash", "meta", "septree_nodes", "septree_bitsets", "membership"],
}


@pytest.fixture(scope="module")
def inst():
    return generate(120, "thick-adversarial", 2)


@pytest.fixture(scope="module", params=list(KINDS))
def built(request, inst):
    oracle = build_oracle(inst, request.param)
    return oracle, dumps_oracle(oracle)


def test_header(built):
    oracle, data = built
    magic, version, kind, count = struct.unpack_from("<4sHBI", data, 0)
    assert magic == MAGIC == b"TXRO"
    assert version == FORMAT_VERSION == 1
    assert kind == KINDS[oracle.kind]
    kind_name, sections = read_sections(data)
    assert kind_name == oracle.kind
    assert list(sections) == SECTIONS[oracle.kind]
    assert count == len(sections)
    assert sections["instance_hash"] == oracle.inst.content_hash()


def test_round_trip_answers(built, inst):
    oracle, data = built
    loaded = loads_oracle(data, inst)
    assert loaded.kind == oracle.kind
    assert loaded.stats() == oracle.stats()
    rng = np.random.default_rng(3)
    pairs = rng.integers(0, inst.n, size=(1000, 2))
    if oracle.kind == "continuous":
        targets = np.round(rng.uniform([inst.xs.min(), inst.ys.min()], [inst.xs.max(), inst.ys.max()], size=(1000, 2)))
        for (s, _), t in zip(pairs, targets):
            t = (float(t[0]), float(t[1]))
            assert loaded.query(int(s), t) == oracle.query(int(s), t)
    else:
        assert np.array_equal(loaded.query_many(pairs), oracle.query_many(pairs))


def test_grid_cell_graph_survives(inst):
    oracle = build_oracle(inst, "grid")
    loaded = loads_oracle(dumps_oracle(oracle), inst)
    assert loaded.graph is not None
    assert loaded.graph.n_cells == oracle.graph.n_cells
    assert np.array_equal(loaded.graph.edges, oracle.graph.edges)


def test_other_instance(built):
    _, data = built
    with pytest.raises(DomainError):
        loads_oracle(data, generate(120, "thick-adversarial", 3))


def test_corrupt_files(built, inst):
    _, data = built
    with pytest.raises(FormatError):
        loads_oracle(b"XXXX" + data[4:], inst)
    with pytest.raises(FormatError):
        loads_oracle(data[:4] + struct.pack("<H", 9) + data[6:], inst)
    with pytest.raises(FormatError):
        loads_oracle(data[:6] + bytes([7]) + data[7:], inst)
    with pytest.raises(FormatError):
        loads_oracle(data[:-10], inst)
    with pytest.raises(FormatError):
        loads_oracle(data + b"\x00", inst)
    with pytest.raises(FormatError):
        loads_oracle(b"TX", inst)


def test_files(tmp_path, built, inst):
    oracle, data = built
    path = tmp_path / f"{oracle.kind}.txro"
    size = save_oracle(oracle, path)
    assert size == path.stat().st_size == len(data)
    assert load_oracle(path, inst).kind == oracle.kind


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(KINDS))
def test_round_trip_on_many_queries(kind, tmp_path):
    inst = generate(300, "bounded-psi", 7, psi=8) if kind == "grid" else generate(300, "thick-adversarial", 7)
    oracle = build_oracle(inst, kind)
    path = tmp_path / f"{kind}.txro"
    save_oracle(oracle, path)
    loaded = load_oracle(path, inst)
    rng = np.random.default_rng(11)
    pairs = rng.integers(0, inst.n, size=(10_000, 2))
    if kind == "continuous":
        lo, hi = [inst.xs.min(), inst.ys.min()], [inst.xs.max(), inst.ys.max()]
        for (s, _), t in zip(pairs, rng.uniform(lo, hi, size=(len(pairs), 2))):
            t = (float(t[0]), float(t[1]))
            assert loaded.query(int(s), t) == oracle.query(int(s), t)
    else:
        assert np.array_equal(loaded.query_many(pairs), oracle.query_many(pairs))
