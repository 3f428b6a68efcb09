"""
Monthly-rebalanced horse race between scenario-robust portfolios and
aggregate-then-estimate portfolios built from noisy ranking views.

For every period ``t`` the views are noisy copies of the ranking realised in
period ``t+1`` (an in-sample experiment), and each method's portfolio is
scored on that same realised return vector. Covariance and prior come from
the whole panel and stay fixed.
"""

from __future__ import annotations

import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregation import AGGREGATORS, OrderProfile, local_improvement
from .core_model import ModelConfig, ReturnsPanel, TotalOrder, estimate_covariance, reverse_optimize_prior
from .estimator import SamplerConfig, ScenarioSet, posterior_from_truncated, truncated_view_means
from .metrics import PerformanceRecord, ceq, count_wins, sharpe_ratio
from .ordinal import DistanceSpec, compose, sample_relative_permutation
from .solvers import ScenarioBounds, solve_maxmin, solve_min_regret, solve_mvo, solve_soft

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ROBUST_METHODS",
    "SOCIAL_METHODS",
    "METHODS",
    "ExperimentGrid",
    "GridResult",
    "HARNESS_SAMPLER",
    "generate_synthetic_panel",
    "run_period",
    "run_grid",
    "write_reports",
]

log = logging.getLogger(__name__)

ROBUST_METHODS = ("maxmin", "minregret", "soft_0.25", "soft_0.5", "soft_0.75", "soft_1")
SOCIAL_METHODS = ("borda", "footrule", "copeland", "bestofk", "mc4")
METHODS = ROBUST_METHODS + SOCIAL_METHODS

# lighter than the library default; chains start close to the target so a
# short burn-in suffices at the horse-race scale (n ~ 10)
HARNESS_SAMPLER = SamplerConfig(n_samples=4_000, burn_in=50, n_chains=200, n_batches=200)

# spawn-key tags keeping the random streams of different purposes apart
_VIEW_TAG, _FIXED_VIEW_TAG, _SAMPLER_TAG = 1, 2, 3


@dataclass(frozen=True)
class ExperimentGrid:
    ks: tuple[int, ...] = (5, 10, 20)
    ds: tuple[float, ...] = (0.2, 0.3, 0.4, 0.47)
    cs: tuple[float, ...] = (0.25, 0.5, 0.75, 0.95)
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    delta: float = 3.0
    resample_views_monthly: bool = True
    annualize_sr: bool = True
    rf: float | str = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "ds", tuple(float(d) for d in self.ds))
        object.__setattr__(self, "cs", tuple(float(c) for c in self.cs))
        object.__setattr__(self, "methods", tuple(str(m) for m in self.methods))
        if not self.ks or min(self.ks) < 1:
            raise ValueError("ks must be positive integers")
        if any(not 0.0 <= d <= 1.0 for d in self.ds) or not self.ds:
            raise ValueError("ds must lie in [0, 1]")
        if any(not 0.0 < c < 1.0 for c in self.cs) or not self.cs:
            raise ValueError("cs must lie in (0, 1) so that tau = 1 - c > 0")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @classmethod
    def from_toml(cls, path) -> "ExperimentGrid":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping(data)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentGrid":
        allowed = {f.name for f in fields(cls)}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown grid keys {sorted(extra)}; allowed: {sorted(allowed)}")
        return cls(**data)

    def cells(self):
        return [(k, d, c) for k in self.ks for d in self.ds for c in self.cs]


@dataclass
class GridResult:
    grid: ExperimentGrid
    records: list[PerformanceRecord]
    sr_wins: list[dict] = field(default_factory=list)
    ceq_wins: list[dict] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, method, k, d, c) -> PerformanceRecord:
        for r in self.records:
            if r.method == method and r.setting == (k, d, c):
                return r
        raise KeyError((method, k, d, c))


def generate_synthetic_panel(
    n: int,
    T: int,
    seed: int = 0,
    vol_range: tuple[float, float] = (0.05, 0.12),
    drift_range: tuple[float, float] = (0.005, 0.015),
) -> ReturnsPanel:
    """Monthly simple returns from correlated lognormal (GBM-style) increments.

    Each asset gets a drift (expected simple return) and a log-volatility
    drawn uniformly from the given ranges. Correlations come from independent
    factors with decaying variances mixed by a random orthogonal matrix.
    """
    if n < 2 or T < 2:
        raise ValueError("need n >= 2 assets and T >= 2 periods")
    lo_v, hi_v = vol_range
    lo_d, hi_d = drift_range
    if not 0 < lo_v <= hi_v or not lo_d <= hi_d or lo_d <= -1:
        raise ValueError("invalid vol_range or drift_range")
    rng = np.random.default_rng(seed)
    drift = rng.uniform(lo_d, hi_d, n)
    vol = rng.uniform(lo_v, hi_v, n)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q *= np.sign(np.diag(r))
    lam = 0.7 ** np.arange(n)
    mix = q * np.sqrt(lam)
    mix /= np.sqrt((mix**2).sum(axis=1))[:, None]  # unit-variance rows
    z = rng.standard_normal((T, n)) @ mix.T
    log_mean = np.log1p(drift) - 0.5 * vol**2
    returns = np.expm1(log_mean + vol * z)
    dates = [f"{2000 + m // 12:04d}-{m % 12 + 1:02d}" for m in range(T)]
    return ReturnsPanel(tuple(dates), returns, tuple(f"A{i:02d}" for i in range(n)))


class _Experiment:
    """Shared state for one panel and grid: prior, covariance and caches."""

    def __init__(self, panel: ReturnsPanel, grid: ExperimentGrid, sampler: SamplerConfig = HARNESS_SAMPLER):
        self.panel = panel
        self.grid = grid
        self.sampler = sampler
        self.n = panel.n_assets
        self.sigma = estimate_covariance(panel)
        self.pi = reverse_optimize_prior(self.sigma, delta=grid.delta)
        self.kmax = max(grid.ks)
        self.cfgs = {c: ModelConfig(delta=grid.delta, c=c) for c in grid.cs}
        self.robust = [m for m in grid.methods if m in ROBUST_METHODS]
        self.social = [m for m in grid.methods if m in SOCIAL_METHODS]
        self._fixed_perms: dict[int, list[np.ndarray]] = {}
        self._specs = {d: DistanceSpec.from_normalized(self.n, d) for d in grid.ds}
        self._truncated: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n_periods(self) -> int:
        return self.panel.n_periods - 1

    def correct_order(self, t: int) -> TotalOrder:
        return TotalOrder.from_scores(self.panel.returns[t + 1])

    def views(self, t: int, d: float) -> list[TotalOrder]:
        """The Kmax noisy orders for period t; smaller K use a prefix."""
        spec = self._specs[d] if d in self._specs else DistanceSpec.from_normalized(self.n, d)
        truth = self.correct_order(t)
        seed = self.grid.seed
        if self.grid.resample_views_monthly:
            perms = []
            for k in range(self.kmax):
                ss = np.random.SeedSequence(seed, spawn_key=(_VIEW_TAG, spec.t, t, k))
                perms.append(sample_relative_permutation(self.n, spec.t, np.random.default_rng(ss)))
        else:
            if spec.t not in self._fixed_perms:
                self._fixed_perms[spec.t] = [
                    sample_relative_permutation(
                        self.n,
                        spec.t,
                        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_FIXED_VIEW_TAG, spec.t, k))),
                    )
                    for k in range(self.kmax)
                ]
            perms = self._fixed_perms[spec.t]
        return [compose(truth, p) for p in perms]

    def _ensure_truncated(self, t: int, orders: Sequence[TotalOrder]):
        # tau + c = 1 under the protocol, so the truncated view mean is shared by every c
        todo = []
        for o in orders:
            if (t, o) not in self._truncated and o not in todo:
                todo.append(o)
        if not todo:
            return
        base = np.random.SeedSequence(self.grid.seed, spawn_key=(_SAMPLER_TAG, t))
        est, se = truncated_view_means(self.pi, self.sigma, todo, 1.0, self.sampler, base)
        for o, e, s in zip(todo, est, se):
            self._truncated[(t, o)] = (e, s)

    def drop_period(self, t: int):
        for key in [key for key in self._truncated if key[0] == t]:
            del self._truncated[key]

    def period(self, t: int, d: float, cells=None) -> dict:
        """Portfolios and realised returns for all (K, c, method) at period t and distance d."""
        ks = sorted({k for k, _ in cells}) if cells else self.grid.ks
        cs = sorted({c for _, c in cells}) if cells else self.grid.cs
        realized = self.panel.returns[t + 1]
        views = self.views(t, d)
        aggregated = {}
        for k in ks:
            prof = OrderProfile.from_orders(views[:k])
            for m in self.social:
                aggregated[(k, m)] = local_improvement(AGGREGATORS[m](prof), prof)
        needed = list(views[: max(ks)]) if self.robust else []
        needed += list(aggregated.values())
        self._ensure_truncated(t, needed)

        out = {}
        for c in cs:
            cfg = self.cfgs[c]
            mu_cache: dict[TotalOrder, np.ndarray] = {}
            mvo_cache: dict[TotalOrder, object] = {}

            def mu_of(o):
                if o not in mu_cache:
                    e, s = self._truncated[(t, o)]
                    mu_cache[o] = posterior_from_truncated(self.pi, self.sigma, o, cfg, e, s, self.sampler.n_samples).mu
                return mu_cache[o]

            def mvo_of(o):
                if o not in mvo_cache:
                    mvo_cache[o] = solve_mvo(mu_of(o), self.sigma, cfg.delta)
                return mvo_cache[o]

            for k in ks:
                if cells and (k, c) not in cells:
                    continue
                if self.robust:
                    vk = views[:k]
                    scen = ScenarioSet(np.stack([mu_of(o) for o in vk]), self.sigma, cfg.delta)
                    reps = [mvo_of(o) for o in vk]
                    f_opt = np.array([r.objective for r in reps])
                    bounds = None
                    for m in self.robust:
                        if m == "maxmin":
                            rep = solve_maxmin(scen)
                        elif m == "minregret":
                            rep = solve_min_regret(scen, f_opt=f_opt)
                        else:
                            if bounds is None:
                                bounds = ScenarioBounds(scen, optima=(f_opt, np.stack([r.w for r in reps])))
                            rep = solve_soft(scen, float(m.split("_")[1]), bounds=bounds)
                        out[(k, c, m)] = (rep.w, float(rep.w @ realized))
                for m in self.social:
                    rep = mvo_of(aggregated[(k, m)])
                    out[(k, c, m)] = (rep.w, float(rep.w @ realized))
        return out


def run_period(
    panel: ReturnsPanel,
    t: int,
    k: int,
    d: float,
    c: float,
    methods: Sequence[str] = METHODS,
    seed: int = 0,
    delta: float = 3.0,
    resample_views_monthly: bool = True,
    sampler: SamplerConfig = HARNESS_SAMPLER,
) -> dict[str, tuple[np.ndarray, float]]:
    """Portfolio weights and realised next-period return of each method for one cell."""
    if not 0 <= t < panel.n_periods - 1:
        raise IndexError(f"period {t} needs row {t + 1}, panel has {panel.n_periods} rows")
    grid = ExperimentGrid(
        ks=(k,), ds=(d,), cs=(c,), methods=tuple(methods), seed=seed, delta=delta,
        resample_views_monthly=resample_views_monthly,
    )
    exp = _Experiment(panel, grid, sampler)
    res = exp.period(t, d)
    return {m: res[(k, c, m)] for m in grid.methods}


def _run_distance(args):
    panel, grid, sampler, d = args
    exp = _Experiment(panel, grid, sampler)
    series = {}
    for t in range(exp.n_periods):
        try:
            res = exp.period(t, d)
        except Exception as exc:
            raise RuntimeError(f"period {t} ({panel.dates[t + 1]}), d={d}: {exc}") from exc
        exp.drop_period(t)
        for (k, c, m), (_, ret) in res.items():
            series.setdefault((k, d, c, m), []).append(ret)
    return series


def _rf_series(panel: ReturnsPanel, rf) -> np.ndarray | float:
    if isinstance(rf, str):
        raise ValueError("rf given as a column name must be resolved when loading the panel")
    rf = np.asarray(rf, dtype=float)
    if rf.ndim == 0:
        return float(rf)
    if rf.shape != (panel.n_periods,):
        raise ValueError(f"rf series has length {rf.size}, panel has {panel.n_periods} rows")
    return rf[1:]


def run_grid(
    panel: ReturnsPanel,
    grid: ExperimentGrid = ExperimentGrid(),
    sampler: SamplerConfig = HARNESS_SAMPLER,
    threads: int = 1,
    rf=None,
) -> GridResult:
    """Run every period for every (K, d, c) cell and compute metrics and win tables.

    ``rf`` overrides ``grid.rf`` and may be a series aligned with the panel rows.
    """
    rf = _rf_series(panel, grid.rf if rf is None else rf)
    jobs = [(panel, grid, sampler, d) for d in grid.ds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            parts = list(pool.map(_run_distance, jobs))
    else:
        parts = [_run_distance(j) for j in jobs]
    series = {}
    for p in parts:
        series.update(p)

    records = []
    for k, d, c in grid.cells():
        for m in grid.methods:
            r = np.array(series[(k, d, c, m)])
            records.append(
                PerformanceRecord(m, (k, d, c), sharpe_ratio(r, rf, grid.annualize_sr), ceq(r, grid.delta), r)
            )
    result = GridResult(grid, records)
    result.sr_wins = win_table(result, "sr")
    result.ceq_wins = win_table(result, "ceq")
    return result


def _group(m):
    return "robust" if m in ROBUST_METHODS else "social"


def win_table(result: GridResult, metric: str) -> list[dict]:
    """Win counts in long format.

    ``comparison`` is ``within_group`` (robust and social methods compete
    separately) or ``combined`` (all methods in one race). ``"all"`` in the
    K, d or c column marks a total over that dimension.
    """
    grid = result.grid
    winners = {}
    for cell in grid.cells():
        vals = {r.method: getattr(r, metric) for r in result.records if r.setting == cell}
        within = set()
        for g in ("robust", "social"):
            sub = {m: v for m, v in vals.items() if _group(m) == g}
            if sub:
                within |= count_wins(sub)
        winners[("within_group", cell)] = within
        winners[("combined", cell)] = count_wins(vals)

    rows = []

    def add(comp, k, d, c, cells):
        for m in grid.methods:
            wins = sum(m in winners[(comp, cell)] for cell in cells)
            rows.append({"comparison": comp, "K": k, "d": d, "c": c, "method": m, "wins": wins})

    all_cells = grid.cells()
    for comp in ("within_group", "combined"):
        for k in grid.ks:
            add(comp, k, "all", "all", [x for x in all_cells if x[0] == k])
        add(comp, "all", "all", "all", all_cells)
        for d in grid.ds:
            for c in grid.cs:
                add(comp, "all", d, c, [x for x in all_cells if x[1] == d and x[2] == c])
    return rows


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:g}"


def write_reports(result: GridResult, out_dir) -> list[Path]:
    """Write sr_wins.csv, ceq_wins.csv, per_cell_metrics.csv and summary.md."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in (("sr_wins.csv", result.sr_wins), ("ceq_wins.csv", result.ceq_wins)):
        p = out / name
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["comparison", "K", "d", "c", "method", "wins"])
            for r in rows:
                w.writerow([r["comparison"], _fmt(r["K"]), _fmt(r["d"]), _fmt(r["c"]), r["method"], r["wins"]])
        paths.append(p)
    p = out / "per_cell_metrics.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "d", "c", "method", "sr", "ceq"])
        for r in result.records:
            k, d, c = r.setting
            w.writerow([k, _fmt(d), _fmt(c), r.method, f"{r.sr:.4f}", f"{r.ceq:.4f}"])
    paths.append(p)
    p = out / "summary.md"
    p.write_text(_summary(result))
    paths.append(p)
    return paths


def _summary(result: GridResult) -> str:
    g = result.grid
    n_cells = len(g.cells())
    lines = [
        "# Horse-race summary",
        "",
        f"Cells: {n_cells} (K in {list(g.ks)}, d in {list(g.ds)}, c in {list(g.cs)}); "
        f"delta = {g.delta:g}; seed = {g.seed}; views resampled monthly: {g.resample_views_monthly}; "
        f"SR annualised: {g.annualize_sr}.",
        "",
    ]
    for metric, rows in (("SR", result.sr_wins), ("CEQ", result.ceq_wins)):
        for comp, title in (("within_group", "within each group"), ("combined", "all methods together")):
            lines += [f"## {metric} wins, {title}", ""]
            head = ["method"] + [f"K={k}" for k in g.ks] + ["total"]
            lines += ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
            for m in g.methods:
                cnt = {r["K"]: r["wins"] for r in rows if r["comparison"] == comp and r["method"] == m and r["d"] == "all"}
                lines.append("| " + " | ".join([m] + [str(cnt[k]) for k in g.ks] + [str(cnt["all"])]) + " |")
            lines.append("")
    lines += ["## Mean metrics over cells", "", "| method | mean SR | mean CEQ |", "|---|---|---|"]
    for m in g.methods:
        recs = [r for r in result.records if r.method == m]
        lines.append(f"| {m} | {np.mean([r.sr for r in recs]):.4f} | {np.mean([r.ceq for r in recs]):.4f} |")
    lines.append("")
    return "\n".join(lines)
