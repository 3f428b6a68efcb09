"""
Mean-variance portfolios on the simplex and their robust counterparts.

Every routine maximises a concave quadratic in the weights ``w`` (no short
sales, fully invested). The robust variants add an epigraph variable ``y``
that is bounded by one linear function per scenario:

* max-min:      y <= mu_k^T w
* min-regret:   y <= mu_k^T w - f_k,  f_k = best attainable value under mu_k
* soft:         the ceil(gamma K)-th largest scenario value is maximised.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._qp import solve_qp
from .errors import ConvergenceError, DimensionError
from .estimator import ScenarioSet

__all__ = [
    "SolveReport",
    "mvo_objective",
    "solve_mvo",
    "solve_maxmin",
    "solve_min_regret",
    "solve_soft",
    "soft_quantile_count",
    "soft_bounds",
    "ScenarioBounds",
    "scenario_optima",
    "max_regret",
    "SOFT_BUDGET",
]

log = logging.getLogger(__name__)

SOFT_BUDGET = 2_000_000


@dataclass
class SolveReport:
    w: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    active_scenarios: tuple[int, ...] = ()
    max_regret: float | None = None
    extra: dict = field(default_factory=dict, repr=False)


def mvo_objective(w, mu, sigma, delta) -> float | np.ndarray:
    """``w^T mu - delta/2 w^T sigma w``; ``mu`` may be a (K, n) stack."""
    w = np.asarray(w, dtype=float)
    return np.asarray(mu) @ w - 0.5 * delta * float(w @ sigma @ w)


def _check_sigma(sigma, n):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (n, n):
        raise DimensionError(f"sigma has shape {sigma.shape}, expected ({n}, {n})")
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-14):
        raise ValueError("sigma must be symmetric")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError("sigma must be positive definite") from None
    return 0.5 * (sigma + sigma.T)


def _clean(w) -> np.ndarray:
    w = np.where(w < 0.0, 0.0, w)
    return w / w.sum()


def _start(n, w0):
    if w0 is None:
        return np.full(n, 1.0 / n)
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (n,) or np.any(w0 < -1e-12) or abs(w0.sum() - 1.0) > 1e-9:
        raise ValueError("w0 must be a point of the simplex")
    return _clean(w0)


def solve_mvo(mu, sigma, delta: float = 3.0, tol: float = 1e-8, w0=None) -> SolveReport:
    """Maximise ``w^T mu - delta/2 w^T sigma w`` over the simplex."""
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if mu.ndim != 1:
        raise DimensionError("mu must be a vector")
    if not delta > 0:
        raise ValueError("delta must be positive")
    sigma = _check_sigma(sigma, n)
    x0 = _start(n, w0)
    res = solve_qp(
        delta * sigma,
        -mu,
        np.ones((1, n)),
        np.ones(1),
        np.eye(n),
        np.zeros(n),
        x0,
        working=[i for i in range(n) if x0[i] == 0.0],
    )
    _check_tol(res.kkt_residual, tol, "solve_mvo")
    w = _clean(res.x)
    return SolveReport(w, float(mvo_objective(w, mu, sigma, delta)), res.kkt_residual, res.iterations)


def _check_tol(residual, tol, who):
    if residual > tol:
        raise ConvergenceError(f"{who}: KKT residual {residual:.3g} exceeds tol={tol:g}")


def _epigraph(mus, offsets, sigma, delta, tol, w0=None, who="solve_maxmin", start=None):
    """Maximise ``min_k (mu_k^T w - offsets_k) - delta/2 w^T sigma w``.

    ``start`` = (x, working rows) warm-starts from a point feasible for these
    rows, e.g. the optimum of a problem with more scenarios.
    """
    k, n = mus.shape
    H = np.zeros((n + 1, n + 1))
    H[:n, :n] = delta * sigma
    g = np.zeros(n + 1)
    g[n] = -1.0
    A_eq = np.append(np.ones(n), 0.0)[None, :]
    # rows 0..n-1: w_i >= 0; rows n..n+k-1: mu_k^T w - y >= offsets_k
    A_in = np.zeros((n + k, n + 1))
    A_in[:n, :n] = np.eye(n)
    A_in[n:, :n] = mus
    A_in[n:, n] = -1.0
    b_in = np.concatenate([np.zeros(n), offsets])
    if start is None:
        w = _start(n, w0)
        vals = mus @ w - offsets
        first = int(np.argmin(vals))
        x0 = np.append(w, vals[first])
        working = [i for i in range(n) if w[i] == 0.0] + [n + first]
    else:
        x0, working = start
        x0 = x0.copy()
        working = list(working)
        vals = mus @ x0[:n] - offsets
        first = int(np.argmin(vals))
        if vals[first] < x0[n] or not any(r >= n for r in working):
            # a scenario new to this problem sits below the old level: restart the epigraph variable
            x0[n] = vals[first]
            working = [r for r in working if r < n] + [n + first]
    res = solve_qp(H, g, A_eq, np.ones(1), A_in, b_in, x0, working=working)
    _check_tol(res.kkt_residual, tol, who)
    w = _clean(res.x[:n])
    worst = float((mus @ w - offsets).min() - 0.5 * delta * (w @ sigma @ w))
    active = tuple(sorted(i - n for i in res.working if i >= n))
    return w, worst, res, active


def _scenarios(scen: ScenarioSet):
    return scen.mus, _check_sigma(scen.sigma, scen.n), scen.delta


def solve_maxmin(scen: ScenarioSet, tol: float = 1e-8, w0=None) -> SolveReport:
    """Maximise the worst scenario value ``min_k f(w, mu_k)``."""
    mus, sigma, delta = _scenarios(scen)
    w, obj, res, active = _epigraph(mus, np.zeros(scen.k), sigma, delta, tol, w0)
    return SolveReport(w, obj, res.kkt_residual, res.iterations, active)


def scenario_optima(scen: ScenarioSet, tol: float = 1e-8) -> np.ndarray:
    """``f_k``: best attainable value under each scenario on its own."""
    mus, sigma, delta = _scenarios(scen)
    return np.array([solve_mvo(mu, sigma, delta, tol).objective for mu in mus])


def max_regret(w, scen: ScenarioSet, f_opt=None) -> float:
    """``max_k f_k - f(w, mu_k)`` for a feasible ``w``."""
    if f_opt is None:
        f_opt = scenario_optima(scen)
    return float(np.max(f_opt - mvo_objective(w, scen.mus, scen.sigma, scen.delta)))


def solve_min_regret(scen: ScenarioSet, tol: float = 1e-8, w0=None, f_opt=None) -> SolveReport:
    """Minimise the largest shortfall against each scenario's own optimum.

    The reported objective is ``max_w min_k (f(w, mu_k) - f_k) = -MaxReg``.
    """
    mus, sigma, delta = _scenarios(scen)
    if f_opt is None:
        f_opt = scenario_optima(scen, tol)
    f_opt = np.asarray(f_opt, dtype=float)
    w, obj, res, active = _epigraph(mus, f_opt, sigma, delta, tol, w0, who="solve_min_regret")
    # f_opt are optima, so regret can only dip below zero by solver noise
    reg = max(0.0, -obj)
    return SolveReport(w, obj, res.kkt_residual, res.iterations, active, max_regret=reg)


def soft_quantile_count(gamma: float, k: int) -> int:
    """Number of scenarios that must reach the objective: ``ceil(gamma K)``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    # guard against 0.1 * 10 = 1.0000000000000002 style round-up
    return max(1, math.ceil(gamma * k - 1e-9))


def _qth_largest(values, q) -> float:
    return float(np.sort(values)[::-1][q - 1])


class ScenarioBounds:
    """Upper bounds on the max-min value of scenario subsets.

    ``single[k]`` is the optimum under scenario ``k`` alone. The two-scenario
    max-min value of ``{i, j}`` bounds every subset containing both; these
    are filled in lazily, only where both single optima exceed the level
    being tested.
    """

    def __init__(self, scen: ScenarioSet, tol: float = 1e-8, optima=None):
        self.mus, self.sigma, self.delta = _scenarios(scen)
        self.tol = tol
        if optima is None:
            reps = [solve_mvo(mu, self.sigma, self.delta, tol) for mu in self.mus]
            optima = ([r.objective for r in reps], [r.w for r in reps])
        # optima: (values, weights) of the single-scenario problems, if already known
        self.single = np.array(optima[0], dtype=float)
        self.w_single = np.array(optima[1], dtype=float)
        if self.single.shape != (self.mus.shape[0],) or self.w_single.shape != self.mus.shape:
            raise DimensionError("optima do not match the scenario set")
        k = self.single.size
        self._pair = np.full((k, k), np.nan)
        np.fill_diagonal(self._pair, self.single)
        self.pair_solves = 0
        self._sets = {}

    def subset(self, members, start=None):
        """Max-min solve over the sorted scenario tuple ``members``, cached.

        Returns ``(w, value, qp_result, active)`` as :func:`_epigraph` does.
        ``start`` is a warm start in global row numbering (row ``n + j`` is
        scenario ``j``).
        """
        hit = self._sets.get(members)
        if hit is None:
            n = self.mus.shape[1]
            warm = None
            if start is not None:
                x, rows = start
                local = {c: i for i, c in enumerate(members)}
                warm = (x, [r if r < n else n + local[r - n] for r in rows if r < n or (r - n) in local])
            hit = _epigraph(self.mus[list(members)], np.zeros(len(members)), self.sigma, self.delta, self.tol, start=warm)
            self._sets[members] = hit
        return hit

    def pair(self, i: int, j: int) -> float:
        v = self._pair[i, j]
        if np.isnan(v):
            v = self._solve_pair(i, j)
            self._pair[i, j] = self._pair[j, i] = v
        return float(v)

    def _solve_pair(self, i, j):
        mus, sigma, delta = self.mus, self.sigma, self.delta
        # if one scenario's optimum already suits the other as well, it is the pair optimum
        for a, b in ((i, j), (j, i)):
            w = self.w_single[a]
            if mvo_objective(w, mus[b], sigma, delta) >= self.single[a]:
                return self.single[a]
        self.pair_solves += 1
        a = i if self.single[i] < self.single[j] else j
        _, v, _, _ = _epigraph(mus[[i, j]], np.zeros(2), sigma, delta, self.tol, w0=self.w_single[a])
        return min(v, self.single[i], self.single[j])

    def adjacency(self, cand, z) -> np.ndarray:
        """Boolean matrix over ``cand``: bound of the pair (diagonal: single) exceeds ``z``."""
        idx = np.asarray(cand)
        up = self.single[idx] > z
        sub = self._pair[np.ix_(idx, idx)]
        missing = np.isnan(sub) & up[:, None] & up[None, :]
        if missing.any():
            for a, b in zip(*np.nonzero(np.triu(missing))):
                self.pair(int(idx[a]), int(idx[b]))
            sub = self._pair[np.ix_(idx, idx)]
        return np.nan_to_num(sub, nan=-np.inf) > z


def soft_bounds(scen: ScenarioSet, tol: float = 1e-8) -> ScenarioBounds:
    """Bounds object that :func:`solve_soft` can share across several gammas."""
    return ScenarioBounds(scen, tol)


def _core(adj, q) -> np.ndarray:
    """Mask of vertices left after repeatedly removing those with fewer than q-1 neighbours."""
    keep = np.diag(adj).copy()
    adj = adj.copy()
    np.fill_diagonal(adj, False)
    while True:
        deg = (adj & keep[None, :]).sum(axis=1)
        drop = keep & (deg < q - 1)
        if not drop.any():
            return keep
        keep &= ~drop


def _has_clique(adj, q) -> bool:
    """Does the graph ``adj`` (diagonal ignored) contain a clique of size q?"""
    m = adj.shape[0]
    nbr = [sum(1 << int(j) for j in np.flatnonzero(adj[i]) if j != i) for i in range(m)]

    def grow(pool, size):
        if size >= q:
            return True
        while pool:
            if size + pool.bit_count() < q:
                return False
            v = (pool & -pool).bit_length() - 1
            pool &= pool - 1
            if grow(pool & nbr[v], size + 1):
                return True
        return False

    return grow((1 << m) - 1, 0)


def solve_soft(
    scen: ScenarioSet, gamma: float, tol: float = 1e-8, budget: int = SOFT_BUDGET, bounds=None
) -> SolveReport:
    """Maximise the ``ceil(gamma K)``-th largest scenario value.

    Equivalent to the best max-min portfolio over all scenario subsets of
    size ``q = ceil(gamma K)``. Rather than visiting every subset, the search
    removes one scenario at a time from the current candidate set, and only
    scenarios that bind at that set's max-min optimum are worth removing:
    any subset that keeps all of them has the same optimum. Candidates are
    first reduced to those that can still form a q-subset in which every pair
    (and every single scenario) beats the incumbent.

    ``bounds`` may carry a :class:`ScenarioBounds` to share across several
    gammas on the same scenario set.
    """
    mus, sigma, delta = _scenarios(scen)
    k, n = mus.shape
    q = soft_quantile_count(gamma, k)
    n_subsets = math.comb(k, q)
    if n_subsets > budget:
        raise ValueError(
            f"soft robustness with K={k}, gamma={gamma} has {n_subsets} scenario subsets "
            f"(budget {budget}); use fewer scenarios or a coarser gamma"
        )
    zero = np.zeros(k)
    if bounds is None:
        bounds = ScenarioBounds(scen, tol)
    single = bounds.single
    state = {"best": -np.inf, "w": None}
    nodes = 0

    def offer(w):
        val = _qth_largest(mvo_objective(w, mus, sigma, delta), q)
        if val > state["best"]:
            state.update(best=val, w=w)

    # first incumbent: max-min over the top-q set at each scenario's own optimum
    tops = set()
    for j in range(k):
        vals = mvo_objective(bounds.w_single[j], mus, sigma, delta)
        tops.add(tuple(sorted(np.argsort(-vals, kind="stable")[:q].tolist())))
    for top in sorted(tops):
        # ascent: re-solve on the top-q set of the latest portfolio until it repeats
        seen = set()
        while top not in seen:
            seen.add(top)
            w = bounds.subset(top)[0]
            offer(w)
            vals = mvo_objective(w, mus, sigma, delta)
            top = tuple(sorted(np.argsort(-vals, kind="stable")[:q].tolist()))

    # node: (candidates, forced members, warm start from the parent)
    stack = [(tuple(range(k)), (), None)]
    while stack:
        cand, forced, start = stack.pop()
        best = state["best"]
        if any(single[i] <= best for i in forced):
            continue
        if len(forced) > 2 and bounds.subset(forced, start)[1] <= best:
            continue
        cand = tuple(i for i in cand if single[i] > best)
        if len(cand) < q:
            continue
        if q > 1:
            adj = bounds.adjacency(cand, best)
            pos = {c: i for i, c in enumerate(cand)}
            f_idx = [pos[i] for i in forced]
            if f_idx and not adj[np.ix_(f_idx, f_idx)].all():
                continue
            free = [i for i, c in enumerate(cand) if c not in forced and adj[i, f_idx].all()]
            need = q - len(forced)
            sub = adj[np.ix_(free, free)]
            keep = _core(sub, need)
            free = [f for f, kp in zip(free, keep) if kp]
            if len(free) < need or not _has_clique(adj[np.ix_(free, free)], need):
                continue
            cand = tuple(sorted(set(forced) | {cand[i] for i in free}))
        nodes += 1
        w, _, res, active = bounds.subset(cand, start)
        offer(w)
        if len(cand) <= q:
            continue
        free_active = [cand[a] for a in active if cand[a] not in forced]
        # subsets keeping every active scenario share this node's optimum; the
        # rest are split by the first active scenario they leave out
        rows = [r if r < n else n + cand[r - n] for r in res.working]
        for i, drop in enumerate(free_active):
            child_rows = [r for r in rows if r != n + drop]
            child_forced = tuple(sorted(set(forced) | set(free_active[:i])))
            if len(child_forced) > q:
                break
            stack.append((tuple(c for c in cand if c != drop), child_forced, (res.x, child_rows)))

    # polish: the max-min portfolio of the incumbent's top-q set is at least as good
    vals = mvo_objective(state["w"], mus, sigma, delta)
    top = tuple(sorted(np.argsort(-vals, kind="stable")[:q].tolist()))
    w, _, res, _ = _epigraph(mus[list(top)], zero[:q], sigma, delta, tol, w0=state["w"])
    vals = mvo_objective(w, mus, sigma, delta)
    if _qth_largest(vals, q) < state["best"]:
        w = state["w"]
        vals = mvo_objective(w, mus, sigma, delta)
    return SolveReport(
        w, _qth_largest(vals, q), res.kkt_residual, res.iterations, top, extra={"nodes": nodes, "q": q}
    )


def _soft_by_enumeration(scen: ScenarioSet, gamma: float, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Reference implementation: best max-min over every subset of size q."""
    mus, sigma, delta = _scenarios(scen)
    q = soft_quantile_count(gamma, scen.k)
    best, best_w = -np.inf, None
    for sub in combinations(range(scen.k), q):
        w, obj, _, _ = _epigraph(mus[list(sub)], np.zeros(q), sigma, delta, tol)
        if obj > best:
            best, best_w = obj, w
    return best_w, best
