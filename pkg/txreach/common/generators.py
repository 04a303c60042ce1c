import logging
import math
import re
from logging import Logger
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import DomainError
from .geom_core import TransmissionInstance

logger: Logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("uniform", "clustered", "bounded-psi", "thick-adversarial")
DECIMALS = 3

Sampler = Callable[[np.random.Generator, int, int, float], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by the 64-bit seed."""
    return np.random.Generator(np.random.Philox(seed))


def _log_uniform(rng: np.random.Generator, lo: float, hi: float, size: int) -> np.ndarray:
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


def _side(n: int) -> float:
    return 2.0 * math.sqrt(max(n, 1))


def _uniform(rng, n, size, psi):
    side = _side(n)
    return rng.uniform(0, side, size), rng.uniform(0, side, size), _log_uniform(rng, 0.5, 3.0, size)


def _clustered(rng, n, size, psi):
    side = _side(n)
    clusters = max(1, math.ceil(math.sqrt(n) / 2))
    centers = rng.uniform(0, side, size=(clusters, 2))
    pick = rng.integers(0, clusters, size=size)
    spread = side / (4.0 * math.sqrt(clusters))
    xs = centers[pick, 0] + rng.normal(0, spread, size)
    ys = centers[pick, 1] + rng.normal(0, spread, size)
    return xs, ys, _log_uniform(rng, 0.5, 3.0, size)


def _bounded_psi(rng, n, size, psi):
    side = _side(n)
    rs = np.ones(size) if psi == 1 else _log_uniform(rng, 1.0, psi, size)
    return rng.uniform(0, side, size), rng.uniform(0, side, size), rs


def _thick_adversarial(rng, n, size, psi):
    # few hubs, each stabbed by the disks of every point placed around it
    side = _side(n)
    hubs = rng.uniform(0, side, size=(max(1, round(n ** (1.0 / 3.0))), 2))
    pick = rng.integers(0, len(hubs), size=size)
    angle = rng.uniform(0, 2 * math.pi, size)
    dist = rng.uniform(0.1, 2.0, size)
    xs = hubs[pick, 0] + dist * np.cos(angle)
    ys = hubs[pick, 1] + dist * np.sin(angle)
    return xs, ys, dist + rng.uniform(0.01, 1.0, size)


SAMPLERS: Dict[str, Sampler] = {
    "uniform": _uniform,
    "clustered": _clustered,
    "bounded-psi": _bounded_psi,
    "thick-adversarial": _thick_adversarial,
}


def parse_distribution(text: str, psi: Optional[float] = None) -> Tuple[str, float]:
    """Accepts 'bounded-psi(8)' as well as a bare name with a separate psi."""
    found = re.fullmatch(r"bounded-psi\(([^)]+)\)", text.strip())
    if found:
        try:
            return "bounded-psi", float(found.group(1))
        except ValueError:
            raise DomainError(f"psi must be a number, got {found.group(1)!r}")
    if text not in SAMPLERS:
        raise DomainError(f"unknown distribution {text!r}; expected one of {', '.join(DISTRIBUTIONS)}")
    return text, 1.0 if psi is None else float(psi)


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.round(values, DECIMALS)


def generate(
    n: int, distribution: str = "uniform", seed: int = 0, *, psi: Optional[float] = None
) -> TransmissionInstance:
    """
    Deterministic instance for (n, distribution, psi, seed). Values are quantised to three
    decimals; points landing on an occupied coordinate are redrawn.

    Parameters:
    - n (int): number of points.
    - distribution (str): uniform, clustered, bounded-psi (or 'bounded-psi(PSI)'), thick-adversarial.
    - seed (int): Philox key.
    - psi (float): radius ratio bound for bounded-psi.
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    name, psi = parse_distribution(distribution, psi)
    if psi < 1:
        raise DomainError(f"psi must be >= 1, got {psi}")
    if n == 0:
        return TransmissionInstance.from_decimal_rows([])
    sampler = SAMPLERS[name]
    rng = make_rng(seed)

    xs, ys, rs = sampler(rng, n, n, psi)
    xs, ys, rs = _quantize(xs), _quantize(ys), _quantize(rs)
    for _ in range(1000):
        _, first = np.unique(np.stack([xs, ys], axis=1), axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        if not len(dup):
            break
        nx, ny, nr = sampler(rng, n, len(dup), psi)
        xs[dup], ys[dup], rs[dup] = _quantize(nx), _quantize(ny), _quantize(nr)
    else:
        raise DomainError(f"could not place {n} distinct points for {distribution!r}")

    rs = np.maximum(rs, 10.0**-DECIMALS)
    if name == "bounded-psi":
        rs = np.clip(rs, 1.0, math.floor(psi * 10**DECIMALS) / 10**DECIMALS)
    rows = [(f"{x:.{DECIMALS}f}", f"{y:.{DECIMALS}f}", f"{r:.{DECIMALS}f}") for x, y, r in zip(xs, ys, rs)]
    logger.debug(f"generated {n} points ({name}, psi={psi}, seed={seed})")
    return TransmissionInstance.from_decimal_rows(rows)
