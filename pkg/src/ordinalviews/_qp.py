"""
Small dense primal active-set solver for convex quadratic programs

    minimise    0.5 x^T H x + g^T x
    subject to  A_eq x  = b_eq
                A_in x >= b_in

started from a feasible point. H only needs to be positive definite on the
null space of the working set, which lets the epigraph variable of the robust
problems (zero curvature) through as long as one scenario row stays active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import ConvergenceError

_gesv = lapack.dgesv


@dataclass
class QPResult:
    x: np.ndarray
    lam_eq: np.ndarray
    lam_in: np.ndarray  # one multiplier per inequality row, zero when inactive
    working: list[int]
    iterations: int
    kkt_residual: float


def _kkt_residual(H, g, A_eq, b_eq, A_in, b_in, x, lam_eq, lam_in) -> float:
    grad = H @ x + g - A_eq.T @ lam_eq - A_in.T @ lam_in
    slack = A_in @ x - b_in
    parts = [
        np.abs(grad).max(initial=0.0),
        np.abs(A_eq @ x - b_eq).max(initial=0.0),
        np.maximum(-slack, 0.0).max(initial=0.0),
        np.maximum(-lam_in, 0.0).max(initial=0.0),
        np.abs(lam_in * slack).max(initial=0.0),
    ]
    return float(max(parts))


def solve_qp(H, g, A_eq, b_eq, A_in, b_in, x0, working=(), max_iter=None, step_tol=1e-11, mult_tol=1e-13):
    """Primal active-set iteration; ``x0`` must be feasible.

    ``working`` lists inequality rows treated as active at the start; they
    must be linearly independent together with ``A_eq`` and tight at ``x0``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
    A_in = np.atleast_2d(np.asarray(A_in, dtype=float))
    b_eq = np.asarray(b_eq, dtype=float)
    b_in = np.asarray(b_in, dtype=float)
    x = np.array(x0, dtype=float)
    nv = x.size
    m_eq = A_eq.shape[0]
    m_in = A_in.shape[0]
    work = list(working)
    if max_iter is None:
        max_iter = 50 * (nv + m_in) + 100

    lam_eq = np.zeros(m_eq)
    lam_in = np.zeros(m_in)
    A_all = np.vstack([A_eq, A_in])
    eq_rows = list(range(m_eq))
    at_min = False  # x minimises over the current working set
    for it in range(1, max_iter + 1):
        A_w = A_all[eq_rows + [m_eq + r for r in work]]
        m_w = A_w.shape[0]
        kkt = np.empty((nv + m_w, nv + m_w))
        kkt[:nv, :nv] = H
        kkt[:nv, nv:] = -A_w.T
        kkt[nv:, :nv] = A_w
        kkt[nv:, nv:] = 0.0
        rhs = np.zeros(nv + m_w)
        np.subtract(-g, H @ x, out=rhs[:nv])
        _, _, sol, info = _gesv(kkt, rhs, overwrite_a=1, overwrite_b=1)
        if info != 0:
            raise ConvergenceError("singular KKT system in active-set QP", x)
        p = sol[:nv]
        mult = sol[nv:]
        # at a vertex (as many working rows as variables) the true step is zero;
        # rounding noise there must not pull in a dependent row
        if at_min or m_w >= nv or np.abs(p).max() <= step_tol * (1.0 + np.abs(x).max()):
            lam_w = mult[m_eq:]
            if not work or lam_w.min() >= -mult_tol:
                lam_eq = mult[:m_eq]
                lam_in = np.zeros(m_in)
                lam_in[work] = lam_w
                res = _kkt_residual(H, g, A_eq, b_eq, A_in, b_in, x, lam_eq, lam_in)
                return QPResult(x, lam_eq, lam_in, list(work), it, res)
            del work[int(np.argmin(lam_w))]
            at_min = False
            continue
        # ratio test against inactive rows that p moves towards
        alpha = 1.0
        block = -1
        ap = A_in @ p
        ap[work] = 0.0
        toward = ap < -1e-15
        if toward.any():
            slack = np.maximum(A_in @ x - b_in, 0.0)
            ratios = np.divide(slack, -ap, out=np.full(m_in, np.inf), where=toward)
            j = int(ratios.argmin())
            if ratios[j] < alpha:
                alpha = float(ratios[j])
                block = j
        x = x + alpha * p
        if block >= 0:
            work.append(block)
        else:
            at_min = True
    raise ConvergenceError(f"active-set QP did not converge in {max_iter} iterations", x)
