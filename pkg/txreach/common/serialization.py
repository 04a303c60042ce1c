import io
import json
import logging
import struct
import zipfile
from logging import Logger
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..settings import app_settings
from .chains import ChainDecomposition
from .continuous_oracle import ContinuousOracle
from .discrete_oracle import ChainIndexTable, DiscreteOracle
from .errors import DomainError, FormatError
from .geom_core import TransmissionInstance
from .grid_oracle import CellGraph, GridOracle, build_grid
from .septree import SeparationTree

logger: Logger = logging.getLogger(__name__)

MAGIC = b"TXRO"
FORMAT_VERSION = 1
KINDS = {"discrete": 1, "grid": 2, "continuous": 3}
KIND_NAMES = {code: name for name, code in KINDS.items()}

_HEADER = struct.Struct("<4sHBI")
_NAME_LEN = struct.Struct("<H")
_PAYLOAD_LEN = struct.Struct("<Q")

# the bitset arrays go to their own section
_BITSET_KEYS = ("bit_offsets", "reaches", "reached")

Oracle = Union[DiscreteOracle, GridOracle, ContinuousOracle]


def _npz(arrays: Dict[str, np.ndarray]) -> bytes:
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    return buffer.getvalue()


def _from_npz(name: str, payload: bytes) -> Dict[str, np.ndarray]:
    try:
        with np.load(io.BytesIO(payload), allow_pickle=False) as archive:
            return {key: archive[key] for key in archive.files}
    except (ValueError, OSError, zipfile.BadZipFile) as e:
        raise FormatError(f"section {name!r} is not a valid array archive: {e}")


def _septree_sections(tree: SeparationTree) -> List[Tuple[str, bytes]]:
    arrays = tree.to_arrays()
    nodes = {key: value for key, value in arrays.items() if key not in _BITSET_KEYS}
    bitsets = {key: arrays[key] for key in _BITSET_KEYS}
    return [("septree_nodes", _npz(nodes)), ("septree_bitsets", _npz(bitsets))]


def _discrete_sections(oracle: DiscreteOracle) -> List[Tuple[str, bytes]]:
    decomposition = oracle.decomposition
    chains = {
        "n": np.array([decomposition.n], dtype=np.int64),
        "k": np.array([oracle.k], dtype=np.int64),
        "threshold": np.array([decomposition.threshold], dtype=np.int64),
        "offsets": np.cumsum([0] + [len(c) for c in decomposition.chains]).astype(np.int64),
        "members": np.array([p for c in decomposition.chains for p in c], dtype=np.int64),
        "remaining": np.asarray(decomposition.remaining, dtype=np.int64),
    }
    table = oracle.table
    tables = {"i": table.i, "j": table.j, "lengths": table.lengths}
    return [("chains", _npz(chains)), ("index_tables", _npz(tables))] + _septree_sections(oracle.septree)


def oracle_sections(oracle: Oracle) -> List[Tuple[str, bytes]]:
    """Named payloads of an oracle, in file order."""
    meta = {"system": app_settings.SYSTEM, "version": app_settings.SYSTEM_VERSION, "kind": oracle.kind}
    sections = [("instance_hash", oracle.inst.content_hash()), ("meta", json.dumps(meta).encode("utf-8"))]
    match oracle.kind:
        case "discrete":
            sections += _discrete_sections(oracle)
        case "continuous":
            sections += _discrete_sections(oracle.discrete)
            sections.append(("membership", _npz({"remaining_order": oracle.remaining_tree.ids})))
        case "grid":
            sections += _septree_sections(oracle.septree)
            membership = {"cell_of": oracle.cell_of}
            if oracle.graph is not None:
                membership.update(keys=oracle.graph.keys, edges=oracle.graph.edges)
            sections.append(("membership", _npz(membership)))
        case _:
            raise DomainError(f"unknown oracle kind {oracle.kind!r}")
    return sections


def dumps_oracle(oracle: Oracle) -> bytes:
    sections = oracle_sections(oracle)
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, KINDS[oracle.kind], len(sections))]
    for name, payload in sections:
        encoded = name.encode("utf-8")
        parts += [_NAME_LEN.pack(len(encoded)), encoded, _PAYLOAD_LEN.pack(len(payload)), payload]
    return b"".join(parts)


def save_oracle(oracle: Oracle, path: Union[str, Path]) -> int:
    """
    Write an oracle file, returns the number of bytes written.

    Parameters:
    - oracle (Oracle): discrete, grid or continuous oracle.
    - path (str | Path): output file.
    """
    data = dumps_oracle(oracle)
    Path(path).write_bytes(data)
    logger.info(f"Wrote {oracle.kind} oracle ({len(data)} bytes) to {path}")
    return len(data)


def read_sections(data: bytes) -> Tuple[str, Dict[str, bytes]]:
    """Parse the container: (kind, {section name: payload})."""
    try:
        magic, version, kind, count = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"not an oracle file (magic {magic!r})")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported oracle file version {version}")
        if kind not in KIND_NAMES:
            raise FormatError(f"unknown oracle kind code {kind}")
        offset = _HEADER.size
        sections: Dict[str, bytes] = {}
        for _ in range(count):
            (name_len,) = _NAME_LEN.unpack_from(data, offset)
            offset += _NAME_LEN.size
            name = data[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (payload_len,) = _PAYLOAD_LEN.unpack_from(data, offset)
            offset += _PAYLOAD_LEN.size
            if offset + payload_len > len(data):
                raise FormatError(f"section {name!r} is truncated")
            sections[name] = data[offset : offset + payload_len]
            offset += payload_len
    except (struct.error, UnicodeDecodeError) as e:
        raise FormatError(f"corrupt oracle file: {e}")
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last section")
    return KIND_NAMES[kind], sections


def _section(sections: Dict[str, bytes], name: str) -> bytes:
    if name not in sections:
        raise FormatError(f"oracle file has no {name!r} section")
    return sections[name]


def _arrays(sections: Dict[str, bytes], name: str, *keys: str) -> Dict[str, np.ndarray]:
    arrays = _from_npz(name, _section(sections, name))
    missing = [key for key in keys if key not in arrays]
    if missing:
        raise FormatError(f"section {name!r} lacks {', '.join(missing)}")
    return arrays


def _load_septree(sections: Dict[str, bytes]) -> SeparationTree:
    nodes = _arrays(
        sections, "septree_nodes",
        "labels", "parent", "depth", "crossings", "member_offsets", "members", "separator_offsets", "separators",
    )
    bitsets = _arrays(sections, "septree_bitsets", *_BITSET_KEYS)
    try:
        return SeparationTree.from_arrays({**nodes, **bitsets})
    except (ValueError, IndexError) as e:
        raise FormatError(f"inconsistent separation tree sections: {e}")


def _load_discrete(inst: TransmissionInstance, sections: Dict[str, bytes]) -> DiscreteOracle:
    chains = _arrays(sections, "chains", "n", "k", "threshold", "offsets", "members", "remaining")
    if int(chains["n"][0]) != inst.n:
        raise FormatError(f"chains section is for {int(chains['n'][0])} points, instance has {inst.n}")
    offsets, members = chains["offsets"], chains["members"]
    decomposition = ChainDecomposition(
        n=inst.n,
        chains=[tuple(int(p) for p in members[offsets[c] : offsets[c + 1]]) for c in range(len(offsets) - 1)],
        remaining=[int(p) for p in chains["remaining"]],
        threshold=int(chains["threshold"][0]),
    )
    tables = _arrays(sections, "index_tables", "i", "j", "lengths")
    table = ChainIndexTable(i=tables["i"], j=tables["j"], lengths=tables["lengths"])
    if table.i.shape != (len(decomposition.chains), inst.n) or table.j.shape != table.i.shape:
        raise FormatError(f"index tables have shape {table.i.shape}, expected {(len(decomposition.chains), inst.n)}")
    return DiscreteOracle(inst, decomposition, table, _load_septree(sections), int(chains["k"][0]))


def _load_grid(inst: TransmissionInstance, sections: Dict[str, bytes]) -> GridOracle:
    membership = _arrays(sections, "membership", "cell_of")
    cell_of = membership["cell_of"]
    if len(cell_of) != inst.n:
        raise FormatError(f"membership section maps {len(cell_of)} points, instance has {inst.n}")
    graph = None
    if "keys" in membership and "edges" in membership:
        members = np.argsort(cell_of, kind="stable")
        graph = CellGraph(
            grid=build_grid(inst),
            keys=membership["keys"],
            cell_of=cell_of,
            member_offsets=np.searchsorted(cell_of[members], np.arange(len(membership["keys"]) + 1)),
            members=members,
            edges=membership["edges"],
        )
    return GridOracle(inst, cell_of, _load_septree(sections), graph)


def loads_oracle(data: bytes, inst: TransmissionInstance) -> Oracle:
    kind, sections = read_sections(data)
    if _section(sections, "instance_hash") != inst.content_hash():
        raise DomainError("oracle file was built for a different instance")
    try:
        meta = json.loads(_section(sections, "meta").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"corrupt meta section: {e}")
    if meta.get("version") != app_settings.SYSTEM_VERSION:
        logger.warning(f"oracle file written by {meta.get('system')} {meta.get('version')}")

    match kind:
        case "discrete":
            return _load_discrete(inst, sections)
        case "continuous":
            order = _arrays(sections, "membership", "remaining_order")["remaining_order"]
            return ContinuousOracle(_load_discrete(inst, sections), remaining_order=order)
        case "grid":
            return _load_grid(inst, sections)


def load_oracle(path: Union[str, Path], inst: TransmissionInstance) -> Oracle:
    """
    Read an oracle file and bind it to `inst`.

    Parameters:
    - path (str | Path): oracle file.
    - inst (TransmissionInstance): the instance the oracle was built for.
    """
    oracle = loads_oracle(Path(path).read_bytes(), inst)
    logger.info(f"Loaded {oracle.kind} oracle for {inst.n} points from {path}")
    return oracle
