"""
Consensus rankings from a profile of total orders.

All rules break ties by ascending asset index. Majority dominance follows the
weak definition ``i >= j`` iff at least half of the orders rank ``i`` above
``j``, so for an even number of orders a pair can dominate each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core_model import TotalOrder
from .errors import CapabilityError, ConvergenceError, DimensionError

__all__ = [
    "OrderProfile",
    "majority_counts",
    "majority_relation",
    "kt_score",
    "borda",
    "footrule_aggregate",
    "copeland",
    "copeland_scores",
    "best_of_k",
    "mc4",
    "mc4_transition_matrix",
    "local_improvement",
    "kemeny_exact",
    "AGGREGATORS",
]

KEMENY_MAX_N = 12


@dataclass(frozen=True)
class OrderProfile:
    """K total orders over the same n assets, stored as a (K, n) rank array."""

    ranks: np.ndarray

    def __post_init__(self):
        r = np.array(self.ranks, dtype=np.int64)
        if r.ndim != 2 or r.shape[0] < 1:
            raise DimensionError("a profile needs at least one order")
        expected = np.arange(1, r.shape[1] + 1)
        if not all(np.array_equal(np.sort(row), expected) for row in r):
            raise ValueError("every profile row must be a permutation of 1..n")
        r.setflags(write=False)
        object.__setattr__(self, "ranks", r)

    @classmethod
    def from_orders(cls, orders: Sequence[TotalOrder]) -> "OrderProfile":
        orders = list(orders)
        if not orders:
            raise DimensionError("a profile needs at least one order")
        n = orders[0].n
        if any(o.n != n for o in orders):
            raise DimensionError("all orders in a profile must have the same n")
        return cls(np.stack([o.ranks for o in orders]))

    @property
    def k(self) -> int:
        return self.ranks.shape[0]

    @property
    def n(self) -> int:
        return self.ranks.shape[1]

    def orders(self) -> list[TotalOrder]:
        return [TotalOrder(r) for r in self.ranks]

    def __len__(self) -> int:
        return self.k


def _profile(profile) -> OrderProfile:
    if isinstance(profile, OrderProfile):
        return profile
    return OrderProfile.from_orders(profile)


def majority_counts(profile) -> np.ndarray:
    """``W[i, j]`` = number of orders ranking asset ``i`` above asset ``j``."""
    r = _profile(profile).ranks
    return (r[:, :, None] < r[:, None, :]).sum(axis=0)


def majority_relation(profile) -> np.ndarray:
    """Boolean ``dominates[i, j]``: at least K/2 orders put ``i`` above ``j``."""
    prof = _profile(profile)
    w = majority_counts(prof)
    dom = 2 * w >= prof.k
    np.fill_diagonal(dom, False)
    return dom


def kt_score(sigma: TotalOrder, profile) -> float:
    """Sum of normalised Kendall-Tau distances from ``sigma`` to every order."""
    prof = _profile(profile)
    if sigma.n != prof.n:
        raise DimensionError(f"order has n={sigma.n}, profile has n={prof.n}")
    return _raw_score(sigma.ranks, prof) / (prof.n * (prof.n - 1) / 2)


def _raw_score(ranks: np.ndarray, prof: OrderProfile) -> int:
    s = np.sign(ranks[:, None] - ranks[None, :])
    p = np.sign(prof.ranks[:, :, None] - prof.ranks[:, None, :])
    return int(np.count_nonzero(s[None] * p < 0) // 2)


def borda(profile) -> TotalOrder:
    """Sort by total Borda score ``sum_k (n - rank_k(i))``."""
    prof = _profile(profile)
    scores = (prof.n - prof.ranks).sum(axis=0)
    return TotalOrder.from_scores(scores)


def footrule_cost(profile) -> np.ndarray:
    """Assignment cost ``C[i, p-1] = sum_k |p - rank_k(i)|`` for positions p = 1..n."""
    prof = _profile(profile)
    pos = np.arange(1, prof.n + 1)
    return np.abs(pos[None, None, :] - prof.ranks[:, :, None]).sum(axis=0)


def footrule_aggregate(profile) -> TotalOrder:
    """Order minimising the total Spearman footrule to the profile.

    Solved as a linear assignment of assets to positions.
    """
    cost = footrule_cost(profile)
    rows, cols = linear_sum_assignment(cost)
    ranks = np.empty(cost.shape[0], dtype=np.int64)
    ranks[rows] = cols + 1
    return TotalOrder(ranks)


def copeland_scores(profile) -> np.ndarray:
    """Assets dominated by ``i`` minus assets dominating ``i``."""
    dom = majority_relation(profile)
    return dom.sum(axis=1) - dom.sum(axis=0)


def copeland(profile) -> TotalOrder:
    return TotalOrder.from_scores(copeland_scores(profile))


def best_of_k(profile) -> TotalOrder:
    """The input order with the lowest Kendall-Tau score (first one on ties)."""
    prof = _profile(profile)
    scores = [_raw_score(r, prof) for r in prof.ranks]
    return TotalOrder(prof.ranks[int(np.argmin(scores))])


def _strict_dominance(profile) -> np.ndarray:
    """Majority relation with split pairs resolved towards the lower index."""
    prof = _profile(profile)
    w = majority_counts(prof)
    wt = w.T
    n = prof.n
    idx = np.arange(n)
    dom = (w > wt) | ((w == wt) & (idx[:, None] < idx[None, :]))
    np.fill_diagonal(dom, False)
    return dom


def mc4_transition_matrix(profile, alpha: float = 0.01) -> np.ndarray:
    """Row-stochastic matrix: move i -> j w.p. (1 + alpha)/n if j dominates i, else alpha/n."""
    prof = _profile(profile)
    n = prof.n
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if n > 1 and alpha > 1.0 / (n - 1):
        raise ValueError(f"alpha={alpha} makes rows exceed 1 for n={n}; need alpha <= 1/(n-1)")
    dom = _strict_dominance(prof)
    p = np.where(dom.T, (1.0 + alpha) / n, alpha / n)
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return p


def mc4(profile, alpha: float = 0.01, tol: float = 1e-12, max_iter: int = 100_000) -> TotalOrder:
    """Markov-chain aggregation: rank by stationary mass of the MC4 chain."""
    p = mc4_transition_matrix(profile, alpha)
    n = p.shape[0]
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = x @ p
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    else:
        raise ConvergenceError(f"MC4 power iteration did not reach tol={tol} in {max_iter} steps", x)
    return TotalOrder.from_scores(x)


def local_improvement(sigma: TotalOrder, profile) -> TotalOrder:
    """One insertion pass: move each asset up while it strictly beats its predecessor.

    An asset only passes the one ahead of it when more orders rank it higher
    than lower, so the Kendall-Tau score never increases.
    """
    prof = _profile(profile)
    if sigma.n != prof.n:
        raise DimensionError(f"order has n={sigma.n}, profile has n={prof.n}")
    w = majority_counts(prof)
    seq = list(sigma.ranking)
    for pos in range(1, len(seq)):
        k = pos
        while k > 0 and w[seq[k], seq[k - 1]] > w[seq[k - 1], seq[k]]:
            seq[k - 1], seq[k] = seq[k], seq[k - 1]
            k -= 1
    return TotalOrder.from_ranking(seq)


def kemeny_exact(profile) -> TotalOrder:
    """Exact Kemeny-Young order by dynamic programming over subsets.

    ``O(2^n n^2)``; limited to ``n <= 12``. Among optimal orders the one whose
    best-first asset sequence is lexicographically smallest is returned.
    """
    prof = _profile(profile)
    n = prof.n
    if n > KEMENY_MAX_N:
        raise CapabilityError(f"kemeny_exact supports n <= {KEMENY_MAX_N}, got n={n}")
    w = majority_counts(prof)
    full = (1 << n) - 1
    # above[mask, a]: orders ranking some b in mask above a, summed over b
    above = np.zeros((1 << n, n), dtype=np.int64)
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        above[mask] = above[mask & (mask - 1)] + w[low]
    # best[mask]: minimal disagreements for ordering the assets outside mask,
    # given that mask occupies the top positions
    best = np.zeros(1 << n, dtype=np.int64)
    bits = [1 << a for a in range(n)]
    for mask in range(full - 1, -1, -1):
        rest = full ^ mask
        cand = None
        for a in range(n):
            if rest & bits[a]:
                # placing a next disagrees with every order putting a later asset above it
                c = above[rest ^ bits[a], a] + best[mask | bits[a]]
                if cand is None or c < cand:
                    cand = c
        best[mask] = cand
    seq = []
    mask = 0
    while mask != full:
        rest = full ^ mask
        for a in range(n):
            if rest & bits[a] and above[rest ^ bits[a], a] + best[mask | bits[a]] == best[mask]:
                seq.append(a)
                mask |= bits[a]
                break
    return TotalOrder.from_ranking(seq)


AGGREGATORS = {
    "borda": borda,
    "footrule": footrule_aggregate,
    "copeland": copeland,
    "bestofk": best_of_k,
    "mc4": mc4,
    "kemeny": kemeny_exact,
}
