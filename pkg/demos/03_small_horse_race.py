"""
A miniature horse race: noisy copies of each month's realised ranking are
fed to every method, and methods are scored by Sharpe ratio and certainty
equivalent. The full 48-cell run is ``ordinalviews simulate --synthetic n=10,T=120``.

Run: python demos/03_small_horse_race.py [out_dir]
"""

import sys

from ordinalviews.harness import ExperimentGrid, generate_synthetic_panel, run_grid, write_reports

panel = generate_synthetic_panel(8, 48, seed=2)
grid = ExperimentGrid(ks=(5, 10), ds=(0.2, 0.47), cs=(0.25, 0.95), seed=2)
print(f"{panel.n_assets} assets, {panel.n_periods} months, {len(grid.cells())} cells, {len(grid.methods)} methods")

result = run_grid(panel, grid)

print("\nSR per cell, K=10")
for d in grid.ds:
    for c in grid.cs:
        recs = sorted((r for r in result if r.setting == (10, d, c)), key=lambda r: -r.sr)
        print(f"  d={d:<4} c={c:<4} " + "  ".join(f"{r.method}:{r.sr:.2f}" for r in recs[:4]) + "  ...")

print("\nSR wins, all methods in one race (within 1% of the best)")
totals = {r["method"]: r["wins"] for r in result.sr_wins
          if r["comparison"] == "combined" and r["K"] == "all" and r["d"] == "all"}
for m, w in sorted(totals.items(), key=lambda kv: -kv[1]):
    print(f"  {m:10s} {'#' * w}")

if len(sys.argv) > 1:
    for p in write_reports(result, sys.argv[1]):
        print("wrote", p)
