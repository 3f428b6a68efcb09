"""
Performance measures for monthly portfolio return series and win counting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

__all__ = ["PerformanceRecord", "sharpe_ratio", "ceq", "count_wins"]

log = logging.getLogger(__name__)

PERIODS_PER_YEAR = 12


@dataclass(frozen=True)
class PerformanceRecord:
    method: str
    setting: tuple  # (K, d, c)
    sr: float
    ceq: float
    monthly_returns: np.ndarray


def _series(x) -> np.ndarray:
    r = np.asarray(x, dtype=float).ravel()
    if r.size < 2:
        raise ValueError("need at least two returns")
    if not np.all(np.isfinite(r)):
        raise ValueError("return series has non-finite entries")
    return r


def sharpe_ratio(portfolio_returns, rf=0.0, annualize: bool = True) -> float:
    """Mean excess return over the standard deviation of returns (ddof=1).

    ``rf`` is a scalar or a series aligned with the returns. Annualised
    figures scale by sqrt(12).
    """
    r = _series(portfolio_returns)
    rf = np.broadcast_to(np.asarray(rf, dtype=float), r.shape)
    sd = r.std(ddof=1)
    if not sd > 0:
        raise ValueError("Sharpe ratio is undefined for a constant return series")
    sr = float(np.mean(r - rf) / sd)
    return sr * math.sqrt(PERIODS_PER_YEAR) if annualize else sr


def ceq(portfolio_returns, delta: float = 3.0) -> float:
    """Certainty-equivalent return ``mean - delta/2 * variance`` (ddof=1)."""
    r = _series(portfolio_returns)
    return float(r.mean() - 0.5 * delta * r.var(ddof=1))


def count_wins(values: Mapping[str, float], rel_tol: float = 0.01) -> set[str]:
    """Methods within ``rel_tol`` of the best value.

    For a positive maximum the band is ``value >= (1 - rel_tol) * max``. When
    the maximum is zero or negative that band would exclude the leader, so
    ``value >= max - rel_tol * |max|`` is used instead.
    """
    if not values:
        raise ValueError("no values to compare")
    best = max(values.values())
    if best > 0:
        cut = (1.0 - rel_tol) * best
    else:
        cut = best - rel_tol * abs(best)
        log.info("win band on non-positive maximum %.6g", best)
    return {m for m, v in values.items() if v >= cut}
