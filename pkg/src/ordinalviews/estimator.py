"""
Posterior expected returns given a qualitative ranking view.

A ranking becomes the event ``V >= 0`` where ``V = P mu + eps`` is normal with
mean ``P pi`` and covariance ``(tau + c) P Sigma P^T``. The posterior mean is

    mu_post = pi + tau/(tau + c) * Sigma P^T (P Sigma P^T)^{-1} (E[V | V >= 0] - P pi)

and the orthant-truncated mean ``E[V | V >= 0]`` is estimated by systematic-scan
Gibbs sampling over univariate truncated-normal conditionals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .core_model import ModelConfig, TotalOrder, pick_matrix_from_order
from .errors import DimensionError, SamplerError

__all__ = [
    "SamplerConfig",
    "ViewDistribution",
    "PosteriorEstimate",
    "ScenarioSet",
    "truncated_mvn_mean",
    "truncated_mvn_mean_batch",
    "view_distribution",
    "ebl_posterior",
    "posterior_batch",
    "scenario_returns",
    "order_seed",
    "truncated_view_means",
    "posterior_from_truncated",
]

# above this standardised lower bound the direct tail formula underflows
_LOG_TAIL_SWITCH = 30.0
_BLOCK = 64
_WARM_TRIES = 16


@dataclass(frozen=True)
class SamplerConfig:
    """Gibbs sampler budget.

    ``n_samples`` retained draws are split evenly over ``n_chains`` parallel
    chains, each discarding ``burn_in`` sweeps first. Standard errors use
    ``n_batches`` batch means (contiguous segments within chains).
    """

    n_samples: int = 50_000
    burn_in: int = 2_000
    n_chains: int = 50
    n_batches: int = 50

    def __post_init__(self):
        if self.n_chains < 1 or self.n_batches < 2 or self.burn_in < 0:
            raise ValueError("invalid sampler configuration")
        if self.n_samples < self.n_chains:
            raise ValueError("n_samples must be at least n_chains")

    @property
    def sweeps(self) -> int:
        return -(-self.n_samples // self.n_chains)


@dataclass(frozen=True)
class ViewDistribution:
    """Normal law of the view vector before truncation."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        m = mean.size
        if mean.ndim != 1 or cov.shape != (m, m):
            raise DimensionError(f"mean has size {m} but cov has shape {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=0.0):
            raise ValueError("view covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def m(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class PosteriorEstimate:
    mu: np.ndarray
    se: np.ndarray
    n_samples: int


@dataclass(frozen=True)
class ScenarioSet:
    """K posterior return vectors sharing one covariance and risk aversion."""

    mus: np.ndarray
    sigma: np.ndarray
    delta: float
    se: np.ndarray | None = None

    def __post_init__(self):
        mus = np.atleast_2d(np.asarray(self.mus, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        k, n = mus.shape
        if k < 1 or sigma.shape != (n, n):
            raise DimensionError(f"scenarios have shape {mus.shape}, sigma {sigma.shape}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "sigma", sigma)

    @property
    def k(self) -> int:
        return self.mus.shape[0]

    @property
    def n(self) -> int:
        return self.mus.shape[1]


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


def order_seed(base, order: TotalOrder, *extra: int) -> np.random.SeedSequence:
    """Seed derived from ``base`` and the order itself.

    Equal orders get equal streams, which makes their posteriors bit-identical
    no matter how they are batched.
    """
    base = _as_seed_sequence(base)
    return np.random.SeedSequence(base.entropy, spawn_key=(*base.spawn_key, *extra, *order.key()))


def _truncated_standard_draw(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of Z ~ N(0, 1) conditioned on Z >= a, for u in (0, 1]."""
    # upper-tail form: P(Z >= z) = u * P(Z >= a)
    z = -ndtri(u * ndtr(-a))
    deep = a > _LOG_TAIL_SWITCH
    if np.any(deep):
        z[deep] = -ndtri_exp(np.log(u[deep]) + log_ndtr(-a[deep]))
    return np.maximum(z, a)


def truncated_mvn_mean_batch(
    means: np.ndarray,
    covs: np.ndarray,
    seeds: Sequence,
    sampler: SamplerConfig = SamplerConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate ``E[V | V >= 0]`` for a stack of views of equal dimension.

    ``means`` is (V, m), ``covs`` is (V, m, m) and ``seeds`` holds one seed
    per view. Each view draws only from its own stream, so its estimate does
    not depend on which other views share the batch.
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    nv, m = means.shape
    if covs.shape != (nv, m, m) or len(seeds) != nv:
        raise DimensionError("means, covs and seeds disagree in shape")
    chains = sampler.n_chains
    sweeps = sampler.sweeps

    prec = np.empty_like(covs)
    sd_marg = np.sqrt(np.einsum("vii->vi", covs))
    for v in range(nv):
        try:
            c_fac = cho_factor(covs[v], lower=True)
        except np.linalg.LinAlgError:
            raise SamplerError(f"view covariance {v} is not positive definite") from None
        prec[v] = cho_solve(c_fac, np.eye(m))
    # upper bound on the orthant probability from the marginals
    if np.any(log_ndtr(means / sd_marg).min(axis=1) < -700.0):
        raise SamplerError("orthant probability is numerically zero for at least one view")

    rngs = [np.random.default_rng(_as_seed_sequence(s)) for s in seeds]
    # chains are tracked as deviations from the untruncated mean
    dev = np.empty((nv, chains, m))
    for v, rng in enumerate(rngs):
        dev[v] = _warm_start(means[v], covs[v], chains, rng) - means[v]

    qdiag = np.einsum("vii->vi", prec)
    cond_sd = 1.0 / np.sqrt(qdiag)  # (V, m)
    coef = -prec / qdiag[:, :, None]  # regression weights, row j
    for v in range(nv):
        np.fill_diagonal(coef[v], 0.0)
    coef_j = [np.ascontiguousarray(coef[:, j, None, :]) for j in range(m)]
    lower = [-means[:, j, None] / cond_sd[:, j, None] for j in range(m)]
    sd_j = [cond_sd[:, j, None] for j in range(m)]

    total = np.zeros((nv, chains, m))
    n_batches_per_chain = max(1, sampler.n_batches // chains)
    seg = np.array_split(np.arange(sweeps), n_batches_per_chain)
    seg_of = np.empty(sweeps, dtype=np.int64)
    for b, s in enumerate(seg):
        seg_of[s] = b
    batch_sums = np.zeros((nv, chains, n_batches_per_chain, m))

    n_total = sampler.burn_in + sweeps
    done = 0
    while done < n_total:
        blk = min(_BLOCK, n_total - done)
        u = np.stack([1.0 - rng.random((blk, m, chains)) for rng in rngs], axis=1)  # (blk, V, m, C)
        for b in range(blk):
            for j in range(m):
                # per-row reduction over a contiguous axis: identical for any batch
                shift = (dev * coef_j[j]).sum(axis=-1)
                a = lower[j] - shift / sd_j[j]
                z = _truncated_standard_draw(a, u[b, :, j, :])
                dev[:, :, j] = np.maximum(shift + sd_j[j] * z, -means[:, j, None])
            it = done + b - sampler.burn_in
            if it >= 0:
                total += dev
                batch_sums[:, :, seg_of[it], :] += dev
        done += blk

    total += sweeps * means[:, None, :]
    batch_sums += means[:, None, None, :] * np.array([len(x) for x in seg], dtype=float)[None, None, :, None]
    mean_est = np.maximum(total.sum(axis=1) / (chains * sweeps), 0.0)
    sizes = np.array([len(s) for s in seg], dtype=float)
    batch_means = (batch_sums / sizes[None, None, :, None]).reshape(nv, -1, m)
    nb = batch_means.shape[1]
    se = batch_means.std(axis=1, ddof=1) / np.sqrt(nb)
    return mean_est, se


def _warm_start(mean, cov, chains, rng) -> np.ndarray:
    """Feasible starting points, exact where cheap.

    Accept-reject from the untruncated law fills as many chains as it can;
    the rest start from a sequential draw along the Cholesky factor that
    truncates each coordinate given the previous ones.
    """
    m = mean.size
    low = np.linalg.cholesky(cov)
    draws = mean + rng.standard_normal((chains * _WARM_TRIES, m)) @ low.T
    ok = draws[np.all(draws >= 0, axis=1)]
    start = np.empty((chains, m))
    take = min(len(ok), chains)
    start[:take] = ok[:take]
    rest = chains - take
    if rest:
        z = np.zeros((rest, m))
        u = 1.0 - rng.random((rest, m))
        for j in range(m):
            base = mean[j] + z[:, :j] @ low[j, :j]
            z[:, j] = _truncated_standard_draw(-base / low[j, j], u[:, j])
        start[take:] = np.maximum(mean + z @ low.T, 0.0)
    return start


def truncated_mvn_mean(
    dist: ViewDistribution,
    n_samples: int = 50_000,
    burn_in: int = 2_000,
    rng=None,
    *,
    n_chains: int = 50,
    n_batches: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and batch-means standard error of ``V | V >= 0``, ``V ~ N(mean, cov)``."""
    if n_samples < 1_000:
        raise ValueError("use at least 1000 samples")
    cfg = SamplerConfig(n_samples, burn_in, n_chains, n_batches)
    est, se = truncated_mvn_mean_batch(dist.mean[None], dist.cov[None], [rng], cfg)
    return est[0], se[0]


def view_distribution(pi, sigma, order: TotalOrder, c: float, tau: float) -> ViewDistribution:
    p = pick_matrix_from_order(order)
    return ViewDistribution(p @ pi, (tau + c) * (p @ sigma @ p.T))


def _check_inputs(pi, sigma, n):
    pi = np.asarray(pi, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if pi.shape != (n,) or sigma.shape != (n, n):
        raise DimensionError(f"pi {pi.shape} / sigma {sigma.shape} do not match n={n}")
    if not np.all(np.isfinite(pi)):
        raise ValueError("prior has non-finite entries")
    return pi, sigma


def posterior_batch(
    pi,
    sigma,
    orders: Sequence[TotalOrder],
    cfg: ModelConfig,
    sampler: SamplerConfig = SamplerConfig(),
    seed=None,
) -> list[PosteriorEstimate]:
    """Posterior means for several orders in one vectorised sampler run."""
    orders = list(orders)
    if not orders:
        return []
    n = orders[0].n
    pi, sigma = _check_inputs(pi, sigma, n)
    truncated, trunc_se = truncated_view_means(pi, sigma, orders, cfg.tau + cfg.c, sampler, seed)
    return [
        posterior_from_truncated(pi, sigma, o, cfg, e, s, sampler.n_samples)
        for o, e, s in zip(orders, truncated, trunc_se)
    ]


def truncated_view_means(pi, sigma, orders, scale, sampler, seed):
    """Run the sampler for each order's view law ``N(P pi, scale * P Sigma P^T)``."""
    base = _as_seed_sequence(seed)
    picks = [pick_matrix_from_order(o) for o in orders]
    means = np.stack([p @ pi for p in picks])
    covs = np.stack([scale * (p @ sigma @ p.T) for p in picks])
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    seeds = [order_seed(base, o) for o in orders]
    return truncated_mvn_mean_batch(means, covs, seeds, sampler)


def posterior_from_truncated(pi, sigma, order, cfg: ModelConfig, e_trunc, e_se, n_samples) -> PosteriorEstimate:
    """Apply the posterior formula to an estimated truncated view mean."""
    p = pick_matrix_from_order(order)
    sp = sigma @ p.T
    try:
        fac = cho_factor(p @ sp, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("P Sigma P^T is singular") from None
    gain = cho_solve(fac, sp.T).T  # Sigma P^T (P Sigma P^T)^{-1}
    mu = pi + cfg.shrink * (gain @ (e_trunc - p @ pi))
    se = cfg.shrink * np.sqrt((gain**2) @ (np.asarray(e_se) ** 2))
    return PosteriorEstimate(mu, se, n_samples)


def ebl_posterior(
    pi,
    sigma,
    order: TotalOrder,
    cfg: ModelConfig,
    sampler: SamplerConfig = SamplerConfig(),
    seed=None,
) -> PosteriorEstimate:
    """Posterior expected returns under a single ranking view."""
    return posterior_batch(pi, sigma, [order], cfg, sampler, seed)[0]


def scenario_returns(
    pi,
    sigma,
    profile,
    cfg: ModelConfig,
    sampler: SamplerConfig = SamplerConfig(),
    seed=None,
) -> ScenarioSet:
    """One posterior vector per order of the profile."""
    orders = profile.orders() if hasattr(profile, "orders") else list(profile)
    ests = posterior_batch(pi, sigma, orders, cfg, sampler, seed)
    mus = np.stack([e.mu for e in ests])
    se = np.stack([e.se for e in ests])
    return ScenarioSet(mus, np.asarray(sigma, dtype=float), cfg.delta, se)
