"""Brute-force references shared by the unit and acceptance tests."""

from itertools import combinations, permutations

import numpy as np

from ordinalviews.core_model import TotalOrder
from ordinalviews.ordinal import discordant_pairs, spearman_footrule


def _bracket_max(fun, lo, hi, points=101, final=1e-10):
    """Grid search for a batch of 1-d concave maximisations on [lo, hi].

    ``fun`` maps an (B, P) array of abscissae to values. Concavity puts the
    maximiser between the neighbours of the best grid point, so each pass
    re-grids that bracket until the spacing drops below ``final``.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    a, b = lo.copy(), hi.copy()
    frac = np.linspace(0.0, 1.0, points)
    rows = np.arange(lo.size)
    while True:
        x = a[:, None] + (b - a)[:, None] * frac[None, :]
        v = fun(x)
        j = np.argmax(v, axis=1)
        best_x, best_v = x[rows, j], v[rows, j]
        h = (b - a) / (points - 1)
        if h.max() <= final:
            return best_v, best_x
        a = np.maximum(lo, best_x - h)
        b = np.minimum(hi, best_x + h)
        points = 21


def grid_max(fun, n):
    """Maximise a concave ``fun`` (rows of weights -> values) over the simplex, n <= 3.

    Nested grid searches: for n = 3 the inner search maximises over w1 with
    w0 fixed, and the resulting function of w0 is again concave. Grids start
    at spacing 1e-2, pass through 1e-4 and stop below 1e-10.
    """
    if n == 1:
        w = np.ones((1, 1))
        return float(fun(w)[0]), w[0]
    if n == 2:
        v, x = _bracket_max(lambda x: fun(np.c_[x.ravel(), 1.0 - x.ravel()]).reshape(x.shape), [0.0], [1.0])
        return float(v[0]), np.array([x[0], 1.0 - x[0]])
    if n != 3:
        raise ValueError("grid oracle handles n <= 3")

    def inner(x0):
        # best w1 for each fixed w0
        def f(x1):
            a = np.broadcast_to(x0[:, None], x1.shape).ravel()
            b = x1.ravel()
            return fun(np.c_[a, b, np.maximum(1.0 - a - b, 0.0)]).reshape(x1.shape)

        return _bracket_max(f, np.zeros(x0.size), 1.0 - x0)

    def outer(x0):
        v, _ = inner(x0.ravel())
        return v.reshape(x0.shape)

    v, x0 = _bracket_max(outer, [0.0], [1.0])
    _, x1 = inner(x0)
    return float(v[0]), np.array([x0[0], x1[0], max(1.0 - x0[0] - x1[0], 0.0)])


def scenario_values(mus, sigma, delta):
    mus = np.atleast_2d(mus)

    def f(w):
        risk = 0.5 * delta * np.einsum("pi,ij,pj->p", w, sigma, w)
        return w @ mus.T - risk[:, None]  # (P, K)

    return f


def oracle_mvo(mu, sigma, delta):
    f = scenario_values(mu, sigma, delta)
    return grid_max(lambda w: f(w)[:, 0], len(mu))


def oracle_maxmin(mus, sigma, delta):
    f = scenario_values(mus, sigma, delta)
    return grid_max(lambda w: f(w).min(axis=1), mus.shape[1])


def oracle_min_regret(mus, sigma, delta):
    """Value ``max_w min_k f_k(w) - f_k*`` (= -MaxReg), optima also by grid."""
    f = scenario_values(mus, sigma, delta)
    f_opt = np.array([oracle_mvo(mu, sigma, delta)[0] for mu in mus])
    return grid_max(lambda w: (f(w) - f_opt).min(axis=1), mus.shape[1])


def oracle_soft(mus, sigma, delta, q):
    """Best q-th largest scenario value: max over q-subsets of the concave subset minimum."""
    f = scenario_values(mus, sigma, delta)
    best = (-np.inf, None)
    for sub in combinations(range(len(mus)), q):
        cols = list(sub)
        v = grid_max(lambda w: f(w)[:, cols].min(axis=1), mus.shape[1])
        if v[0] > best[0]:
            best = v
    return best


def all_orders(n):
    return [TotalOrder.from_ranking(p) for p in permutations(range(n))]


def brute_kemeny(prof):
    """(minimal raw disagreement count, lexicographically first optimal best-first sequence)."""
    best = None
    for o in all_orders(prof.n):
        s = sum(discordant_pairs(o, x) for x in prof.orders())
        if best is None or s < best[0]:
            best = (s, tuple(o.ranking.tolist()))
    return best


def brute_footrule(prof):
    return min(sum(spearman_footrule(o, x) for x in prof.orders()) for o in all_orders(prof.n))
