"""
Command-line entry point: ``ordinalviews {aggregate,estimate,solve,simulate}``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from .aggregation import AGGREGATORS, OrderProfile, kt_score, local_improvement
from .core_model import (
    ModelConfig,
    TotalOrder,
    estimate_covariance,
    read_csv_table,
    read_panel_csv,
    reverse_optimize_prior,
)
from .errors import CapabilityError, ConvergenceError, DimensionError, SamplerError
from .estimator import SamplerConfig, ScenarioSet, posterior_batch
from .harness import ExperimentGrid, generate_synthetic_panel, run_grid, write_reports
from .solvers import solve_maxmin, solve_min_regret, solve_mvo, solve_soft

log = logging.getLogger("ordinalviews")


def read_order_file(path, asset_ids=None) -> tuple[list[str], list[TotalOrder]]:
    """One order per line, asset ids listed best first and separated by commas.

    Without ``asset_ids`` the universe is taken from the first line in the
    order written there.
    """
    lines = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            row = [x.strip() for x in row if x.strip()]
            if row and not row[0].startswith("#"):
                lines.append(row)
    if not lines:
        raise ValueError(f"{path}: no orders found")
    ids = list(asset_ids) if asset_ids is not None else list(lines[0])
    index = {a: i for i, a in enumerate(ids)}
    if len(index) != len(ids):
        raise ValueError(f"{path}: repeated asset id")
    orders = []
    for lineno, row in enumerate(lines, 1):
        if sorted(row) != sorted(ids):
            raise ValueError(f"{path}: order {lineno} is not a permutation of {ids}")
        orders.append(TotalOrder.from_ranking([index[a] for a in row]))
    return ids, orders


def _read_matrix(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header of asset ids; a leading label column is dropped."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    try:
        float(body[0][0])
    except ValueError:
        # first column holds row labels, as written by pandas or spreadsheets
        header, body = header[1:], [r[1:] for r in body]
    try:
        values = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise DimensionError(f"{path}: rows do not match the header")
    return header, values


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_aggregate(args) -> int:
    ids, orders = read_order_file(args.profile)
    prof = OrderProfile.from_orders(orders)
    out = AGGREGATORS[args.method](prof)
    if args.local_improve:
        out = local_improvement(out, prof)
    print(",".join(ids[i] for i in out.ranking))
    print(f"kt_score,{kt_score(out, prof):.6f}")
    return 0


def cmd_estimate(args) -> int:
    panel = read_panel_csv(args.panel, levels=args.levels)
    _, orders = read_order_file(args.orders, panel.asset_ids)
    cfg = ModelConfig(delta=args.delta, c=args.c, tau=args.tau)
    sigma = estimate_covariance(panel)
    pi = reverse_optimize_prior(sigma, delta=cfg.delta)
    sampler = SamplerConfig(n_samples=args.samples, burn_in=args.burn_in)
    ests = posterior_batch(pi, sigma, orders, cfg, sampler, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["order", "asset", "mu", "se"])
    for k, est in enumerate(ests):
        for a, m, s in zip(panel.asset_ids, est.mu, est.se):
            w.writerow([k, a, _fmt(m), _fmt(s)])
    return 0


def cmd_solve(args) -> int:
    ids, mus = _read_matrix(args.scenarios)
    sig_ids, sigma = _read_matrix(args.sigma)
    if sig_ids != ids:
        raise DimensionError("scenario and covariance files list different assets")
    scen = ScenarioSet(mus, sigma, args.delta)
    if args.method == "mvo":
        if scen.k != 1:
            raise DimensionError("mvo takes exactly one scenario row")
        rep = solve_mvo(scen.mus[0], sigma, args.delta, args.tol)
    elif args.method == "maxmin":
        rep = solve_maxmin(scen, args.tol)
    elif args.method == "minregret":
        rep = solve_min_regret(scen, args.tol)
    else:
        if args.gamma is None:
            raise ValueError("--gamma is required for soft")
        rep = solve_soft(scen, args.gamma, args.tol)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["field", "value"])
    w.writerow(["objective", _fmt(rep.objective)])
    w.writerow(["kkt_residual", _fmt(rep.kkt_residual)])
    w.writerow(["iterations", rep.iterations])
    if rep.max_regret is not None:
        w.writerow(["max_regret", _fmt(rep.max_regret)])
    for a, x in zip(ids, rep.w):
        w.writerow([f"w:{a}", _fmt(x)])
    return 0


def _parse_synthetic(spec: str) -> dict:
    out = {}
    for part in spec.split(","):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in ("n", "T"):
            raise ValueError(f"--synthetic accepts n=... and T=..., got {key!r}")
        out[key] = int(val)
    if set(out) != {"n", "T"}:
        raise ValueError("--synthetic needs both n and T, e.g. n=10,T=120")
    return out


def cmd_simulate(args) -> int:
    grid = ExperimentGrid.from_toml(args.grid) if args.grid else ExperimentGrid()
    if args.seed is not None:
        grid = replace(grid, seed=args.seed)
    rf = grid.rf
    if args.panel:
        exclude = [rf] if isinstance(rf, str) else []
        panel = read_panel_csv(args.panel, levels=args.levels, exclude=exclude)
        if isinstance(rf, str):
            cols, _, values = read_csv_table(args.panel)
            if rf not in cols:
                raise ValueError(f"rf column {rf!r} not in {args.panel}")
            rf = values[:, cols.index(rf)]
            if args.levels:
                rf = rf[1:]
    else:
        if isinstance(rf, str):
            raise ValueError("an rf column name needs --panel")
        panel = generate_synthetic_panel(**_parse_synthetic(args.synthetic), seed=grid.seed)
    t0 = time.perf_counter()
    result = run_grid(panel, grid, threads=args.threads, rf=rf)
    paths = write_reports(result, args.out)
    log.info("grid of %d cells done in %.1fs", len(grid.cells()), time.perf_counter() - t0)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ordinalviews", description=__doc__.strip())
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="consensus order of a profile")
    p.add_argument("profile", help="one order per line, asset ids best first")
    p.add_argument("--method", choices=sorted(AGGREGATORS), default="borda")
    p.add_argument("--local-improve", action="store_true")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("estimate", help="posterior expected returns under ranking views")
    p.add_argument("panel", help="returns CSV: date,<asset ids...>")
    p.add_argument("orders", help="order file, one view per line")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=None, help="default 1 - c")
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--burn-in", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", action="store_true", help="panel holds index levels, not returns")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("solve", help="mean-variance or robust portfolio")
    p.add_argument("scenarios", help="CSV with asset-id header and one row per scenario mean")
    p.add_argument("sigma", help="covariance CSV with asset-id header")
    p.add_argument("--method", choices=["mvo", "maxmin", "minregret", "soft"], default="mvo")
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run the synthetic-view horse race")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--panel")
    src.add_argument("--synthetic", metavar="n=..,T=..")
    p.add_argument("--grid", help="TOML grid file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the grid seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--levels", action="store_true")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, DimensionError, CapabilityError, ConvergenceError, SamplerError, OSError) as exc:
        print(f"ordinalviews {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
