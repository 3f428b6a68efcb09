"""
Shared financial data model: return panels, covariance, prior and pick matrices.

Conventions
-----------
Assets are indexed ``0..n-1``. A :class:`TotalOrder` stores for every asset its
rank in ``1..n`` where rank 1 is the asset with the highest expected return.
Covariance matrices, prior vectors and pick matrices are plain ``numpy``
arrays; the functions here validate them at the boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "TotalOrder",
    "ReturnsPanel",
    "ModelConfig",
    "estimate_covariance",
    "reverse_optimize_prior",
    "pick_matrix_from_order",
    "read_panel_csv",
    "write_panel_csv",
    "read_csv_table",
]


class TotalOrder:
    """A strict ranking of ``n`` assets.

    ``ranks[i]`` is the position (1 = best) of asset ``i``. Use
    :meth:`from_ranking` when you have the assets listed best-first.
    """

    __slots__ = ("_ranks", "_key")

    def __init__(self, ranks: Iterable[int]):
        r = np.array(list(ranks) if not isinstance(ranks, np.ndarray) else ranks, dtype=np.int64)
        if r.ndim != 1 or r.size == 0:
            raise DimensionError("ranks must be a non-empty 1-d sequence")
        n = r.size
        if not np.array_equal(np.sort(r), np.arange(1, n + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{n}, got {r.tolist()}")
        r.setflags(write=False)
        self._ranks = r
        self._key = tuple(int(x) for x in r)

    @classmethod
    def from_ranking(cls, ranking: Sequence[int]) -> "TotalOrder":
        """Build from asset indices listed from best (rank 1) to worst."""
        ranking = np.asarray(ranking, dtype=np.int64)
        n = ranking.size
        if not np.array_equal(np.sort(ranking), np.arange(n)):
            raise ValueError(f"ranking must be a permutation of 0..{n - 1}")
        ranks = np.empty(n, dtype=np.int64)
        ranks[ranking] = np.arange(1, n + 1)
        return cls(ranks)

    @classmethod
    def from_scores(cls, scores: Sequence[float]) -> "TotalOrder":
        """Rank assets by decreasing score; ties go to the lower asset index."""
        scores = np.asarray(scores, dtype=float)
        ranking = np.lexsort((np.arange(scores.size), -scores))
        return cls.from_ranking(ranking)

    @classmethod
    def identity(cls, n: int) -> "TotalOrder":
        return cls(np.arange(1, n + 1))

    @property
    def ranks(self) -> np.ndarray:
        return self._ranks

    @property
    def ranking(self) -> np.ndarray:
        """Asset indices from best to worst."""
        out = np.empty(self.n, dtype=np.int64)
        out[self._ranks - 1] = np.arange(self.n)
        return out

    @property
    def n(self) -> int:
        return self._ranks.size

    def reversed(self) -> "TotalOrder":
        return TotalOrder(self.n + 1 - self._ranks)

    def key(self) -> tuple[int, ...]:
        return self._key

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, TotalOrder) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"TotalOrder(ranking={self.ranking.tolist()})"


@dataclass(frozen=True)
class ReturnsPanel:
    """T x n matrix of periodic simple returns with period and asset labels."""

    dates: tuple[str, ...]
    returns: np.ndarray = field(repr=False)
    asset_ids: tuple[str, ...]

    def __post_init__(self):
        r = np.array(self.returns, dtype=float)
        if r.ndim != 2:
            raise DimensionError("returns must be a 2-d array (T x n)")
        T, n = r.shape
        if T < 2:
            raise DimensionError(f"a panel needs at least 2 periods, got {T}")
        if len(self.dates) != T or len(self.asset_ids) != n:
            raise DimensionError("dates/asset_ids do not match the returns shape")
        if len(set(self.asset_ids)) != n:
            raise ValueError("asset ids must be distinct")
        if not np.all(np.isfinite(r)):
            raise ValueError("panel has missing or non-finite entries")
        if np.any(r <= -1.0):
            raise ValueError("simple returns must exceed -1")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        object.__setattr__(self, "asset_ids", tuple(str(a) for a in self.asset_ids))

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    @classmethod
    def from_levels(cls, dates, levels, asset_ids) -> "ReturnsPanel":
        """Convert total-return index levels to holding-period returns."""
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 2 or levels.shape[0] < 3:
            raise DimensionError("need at least 3 index levels to form 2 returns")
        if np.any(levels <= 0):
            raise ValueError("index levels must be positive")
        returns = levels[1:] / levels[:-1] - 1.0
        return cls(tuple(dates)[1:], returns, tuple(asset_ids))


@dataclass(frozen=True)
class ModelConfig:
    """Risk aversion, view confidence and prior uncertainty.

    ``tau`` defaults to ``1 - c``, the coupling used by the experiment
    protocol; pass it explicitly to decouple the two.
    """

    delta: float = 3.0
    c: float = 0.5
    tau: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.tau is None:
            if not self.c < 1:
                raise ValueError("tau defaults to 1 - c, which needs c < 1; pass tau explicitly")
            object.__setattr__(self, "tau", 1.0 - self.c)
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def shrink(self) -> float:
        """Weight tau / (tau + c) applied to the view correction."""
        return self.tau / (self.tau + self.c)


def estimate_covariance(panel, jitter: float = 1e-10, repair: bool = True) -> np.ndarray:
    """Sample covariance of the panel columns (denominator ``T - 1``).

    When ``repair`` is set and the estimate is not strictly positive definite,
    ``m * mean(diag)`` is added to the diagonal for ``m`` in the ladder
    ``jitter, 100*jitter, ...`` until a Cholesky factorisation succeeds and
    the smallest eigenvalue is positive.
    """
    r = panel.returns if isinstance(panel, ReturnsPanel) else np.asarray(panel, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2:
        raise DimensionError("covariance needs a 2-d panel with at least 2 rows")
    sigma = np.cov(r, rowvar=False, ddof=1).reshape(r.shape[1], r.shape[1])
    sigma = 0.5 * (sigma + sigma.T)
    if not repair or _is_spd(sigma):
        return sigma
    scale = float(np.mean(np.diag(sigma)))
    if scale <= 0:
        scale = 1.0
    mult = jitter
    while mult <= 1.0:
        fixed = sigma + mult * scale * np.eye(sigma.shape[0])
        if _is_spd(fixed):
            return fixed
        mult *= 100.0
    raise np.linalg.LinAlgError("covariance could not be repaired to positive definite")


def _is_spd(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return bool(np.linalg.eigvalsh(a)[0] > 0)


def reverse_optimize_prior(sigma, w_ref=None, delta: float = 3.0) -> np.ndarray:
    """Implied equilibrium returns ``delta * sigma @ w_ref``.

    ``w_ref`` defaults to equal weights.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    if sigma.shape != (n, n):
        raise DimensionError("sigma must be square")
    if w_ref is None:
        w_ref = np.full(n, 1.0 / n)
    w_ref = np.asarray(w_ref, dtype=float)
    if w_ref.shape != (n,):
        raise DimensionError(f"w_ref has shape {w_ref.shape}, expected ({n},)")
    if abs(w_ref.sum() - 1.0) > 1e-9 or np.any(w_ref < -1e-12):
        raise ValueError("w_ref must lie on the simplex")
    return delta * (sigma @ w_ref)


def pick_matrix_from_order(order: TotalOrder) -> np.ndarray:
    """Adjacent-chain pick matrix: row j says rank j beats rank j+1."""
    n = order.n
    if n < 2:
        raise DimensionError("a view needs at least two assets")
    ranking = order.ranking
    p = np.zeros((n - 1, n))
    rows = np.arange(n - 1)
    p[rows, ranking[:-1]] = 1.0
    p[rows, ranking[1:]] = -1.0
    return p


def read_csv_table(path) -> tuple[list[str], list[str], np.ndarray]:
    """Read ``date,<col_1>,...`` CSV; returns (columns, dates, values)."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    dates = [row[0].strip() for row in body]
    try:
        values = np.array([[float(x) for x in row[1:]] for row in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header) - 1:
        raise DimensionError(f"{path}: ragged rows")
    return header[1:], dates, values


def read_panel_csv(path, levels: bool = False, exclude: Sequence[str] = ()) -> ReturnsPanel:
    """Load a panel; with ``levels=True`` cells are total-return index levels."""
    cols, dates, values = read_csv_table(path)
    keep = [i for i, c in enumerate(cols) if c not in set(exclude)]
    cols = [cols[i] for i in keep]
    values = values[:, keep]
    if levels:
        return ReturnsPanel.from_levels(dates, values, cols)
    return ReturnsPanel(tuple(dates), values, tuple(cols))


def write_panel_csv(panel: ReturnsPanel, path) -> None:
    # repr() of a float is the shortest string that round-trips exactly
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.asset_ids])
        for d, row in zip(panel.dates, panel.returns):
            w.writerow([d, *(repr(float(x)) for x in row)])
