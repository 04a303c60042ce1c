from typing import Callable, Iterator, Optional, Tuple

import numpy as np
import pytest

from txreach.common.generators import generate
from txreach.common.geom_core import TransmissionInstance

A, B, C = 0, 1, 2
P1, P2, P3 = 0, 1, 2

FIXTURE_A_TEXT = "3\n0 0 2\n1 0 1\n3 0 2.5\n"


@pytest.fixture
def fixture_a() -> TransmissionInstance:
    """a=(0,0) r=2, b=(1,0) r=1, c=(3,0) r=2.5: a <-> b, c -> b."""
    return TransmissionInstance.from_points([(0, 0, 2), (1, 0, 1), (3, 0, 2.5)])


@pytest.fixture
def fixture_b() -> TransmissionInstance:
    """p1=(0,0) r=1, p2=(1,0) r=2, p3=(2,0) r=4."""
    return TransmissionInstance.from_points([(0, 0, 1), (1, 0, 2), (2, 0, 4)])


@pytest.fixture
def spread() -> TransmissionInstance:
    """Three points no disk of which holds another center."""
    return TransmissionInstance.from_points([(0, 0, 1), (10, 0, 1), (20, 0, 1)])


@pytest.fixture
def make_instance() -> Callable[..., TransmissionInstance]:
    def make(
        n: int, seed: int = 0, distribution: str = "uniform", psi: Optional[float] = None
    ) -> TransmissionInstance:
        return generate(n, distribution, seed, psi=psi)

    return make


@pytest.fixture
def small_indexes(monkeypatch):
    """Force the block / tree code paths of the membership indexes on small inputs."""
    from txreach.settings import app_settings

    monkeypatch.setattr(app_settings, "index_scan_max", 4)
    monkeypatch.setattr(app_settings, "index_block_size", 4)
    return app_settings


# distributions of the acceptance-size runs; bounded-psi needs an explicit ratio
ACCEPTANCE_DISTRIBUTIONS = [("uniform", None), ("clustered", None), ("bounded-psi", 8.0), ("thick-adversarial", None)]


def acceptance_instances(
    distribution: str, psi: Optional[float], seeds: int, max_n: int = 300
) -> Iterator[Tuple[int, TransmissionInstance]]:
    """(seed, instance) for `seeds` seeds, n drawn from [2, max_n] per seed."""
    sizes = np.random.default_rng(seeds + len(distribution)).integers(2, max_n + 1, size=seeds)
    for seed, n in enumerate(sizes):
        yield seed, generate(int(n), distribution, seed, psi=psi)
