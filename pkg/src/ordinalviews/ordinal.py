"""
Permutation distances and exact uniform sampling of orders at a fixed
Kendall-Tau distance.

Distances are raw integer counts internally; :func:`kendall_tau` returns the
normalised fraction of discordant pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core_model import TotalOrder
from .errors import DimensionError

__all__ = [
    "DistanceSpec",
    "discordant_pairs",
    "kendall_tau",
    "spearman_footrule",
    "build_mahonian",
    "sample_order_at_distance",
    "sample_relative_permutation",
]

log = logging.getLogger(__name__)


def _ranks(order) -> np.ndarray:
    return order.ranks if isinstance(order, TotalOrder) else np.asarray(order, dtype=np.int64)


def discordant_pairs(a, b) -> int:
    """Raw Kendall-Tau distance: pairs ranked in opposite directions."""
    ra, rb = _ranks(a), _ranks(b)
    if ra.shape != rb.shape:
        raise DimensionError(f"orders have different sizes {ra.size} and {rb.size}")
    da = np.sign(ra[:, None] - ra[None, :])
    db = np.sign(rb[:, None] - rb[None, :])
    return int(np.count_nonzero(da * db < 0) // 2)


def kendall_tau(a, b) -> float:
    """Normalised Kendall-Tau distance in [0, 1]."""
    n = _ranks(a).size
    if n < 2:
        raise DimensionError("Kendall-Tau distance needs n >= 2")
    return discordant_pairs(a, b) / (n * (n - 1) / 2)


def spearman_footrule(a, b) -> int:
    """Sum of absolute rank displacements."""
    ra, rb = _ranks(a), _ranks(b)
    if ra.shape != rb.shape:
        raise DimensionError(f"orders have different sizes {ra.size} and {rb.size}")
    return int(np.abs(ra - rb).sum())


@lru_cache(maxsize=32)
def _mahonian_rows(n: int) -> tuple[tuple[int, ...], ...]:
    rows = [(1,)]  # m = 0
    for m in range(1, n + 1):
        prev = rows[-1]
        width = m * (m - 1) // 2 + 1
        # counts[m][t] = sum_{j=0}^{m-1} counts[m-1][t-j], via a running window
        out = [0] * width
        acc = 0
        for t in range(width):
            if t < len(prev):
                acc += prev[t]
            if t - m >= 0 and t - m < len(prev):
                acc -= prev[t - m]
            out[t] = acc
        rows.append(tuple(out))
    return tuple(rows)


def build_mahonian(n: int) -> list[list[int]]:
    """Table ``counts[m][t]`` of permutations of ``m`` items with ``t`` inversions.

    Every row is padded with zeros to ``n(n-1)/2 + 1`` columns. Entries are
    exact Python integers.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > 200:
        raise ValueError("Mahonian tables are limited to n <= 200")
    rows = _mahonian_rows(n)
    width = n * (n - 1) // 2 + 1
    return [list(r) + [0] * (width - len(r)) for r in rows]


@dataclass(frozen=True)
class DistanceSpec:
    """Target Kendall-Tau distance as a raw inversion count ``t`` for ``n`` items."""

    n: int
    t: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        max_t = self.n * (self.n - 1) // 2
        if not 0 <= self.t <= max_t:
            raise ValueError(f"t={self.t} outside [0, {max_t}] for n={self.n}")

    @classmethod
    def from_normalized(cls, n: int, d: float) -> "DistanceSpec":
        """Round ``d * n(n-1)/2`` to the nearest integer, ties away from zero."""
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"normalised distance must be in [0, 1], got {d}")
        pairs = n * (n - 1) // 2
        t = int(np.floor(d * pairs + 0.5))
        spec = cls(n, t)
        if pairs and abs(spec.d - d) > 1e-12:
            log.info("distance %.6g not attainable for n=%d, using %d/%d = %.6g", d, n, t, pairs, spec.d)
        return spec

    @property
    def d(self) -> float:
        pairs = self.n * (self.n - 1) // 2
        return self.t / pairs if pairs else 0.0


def _randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large ``bound``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound <= 2**62:
        return int(rng.integers(bound))
    k = bound.bit_length()
    nbytes = (k + 7) // 8
    while True:
        x = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - k)
        if x < bound:
            return x


def sample_relative_permutation(n: int, t: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform permutation of ``0..n-1`` with exactly ``t`` inversions.

    Draws the Lehmer code position by position, weighting each choice by the
    number of completions (Mahonian counts), then decodes it.
    """
    DistanceSpec(n, t)
    rows = _mahonian_rows(n)
    code = []
    remaining = t
    for i in range(n):
        rest = n - 1 - i  # items after position i
        tail = rows[rest]
        total = rows[rest + 1][remaining]
        x = _randbelow(rng, total)
        for j in range(min(rest, remaining) + 1):
            r = remaining - j
            w = tail[r] if r < len(tail) else 0
            if x < w:
                break
            x -= w
        code.append(j)
        remaining -= j
    pool = list(range(n))
    return np.array([pool.pop(j) for j in code], dtype=np.int64)


def sample_order_at_distance(ref: TotalOrder, spec: DistanceSpec, rng: np.random.Generator) -> TotalOrder:
    """Uniform draw among orders with raw Kendall-Tau distance ``spec.t`` from ``ref``."""
    if spec.n != ref.n:
        raise DimensionError(f"spec is for n={spec.n}, reference has n={ref.n}")
    perm = sample_relative_permutation(ref.n, spec.t, rng)
    return compose(ref, perm)


def compose(ref: TotalOrder, perm: np.ndarray) -> TotalOrder:
    """Relabel positions of ``ref`` by ``perm``; distance to ``ref`` = inversions of ``perm``."""
    return TotalOrder(perm[ref.ranks - 1] + 1)
