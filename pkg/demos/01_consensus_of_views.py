"""
Four analysts rank six sectors. How far apart are they, and what single
ranking best summarises them?

Run: python demos/01_consensus_of_views.py
"""

import numpy as np

from ordinalviews.aggregation import AGGREGATORS, OrderProfile, kt_score, local_improvement
from ordinalviews.core_model import TotalOrder
from ordinalviews.ordinal import kendall_tau

sectors = ["energy", "tech", "health", "banks", "retail", "utilities"]
names = {s: i for i, s in enumerate(sectors)}

views = {
    "analyst A": ["tech", "health", "energy", "banks", "retail", "utilities"],
    "analyst B": ["tech", "energy", "health", "retail", "banks", "utilities"],
    "analyst C": ["health", "tech", "banks", "energy", "utilities", "retail"],
    "analyst D": ["energy", "banks", "tech", "utilities", "health", "retail"],
}
orders = {who: TotalOrder.from_ranking([names[s] for s in seq]) for who, seq in views.items()}
profile = OrderProfile.from_orders(list(orders.values()))

print("Pairwise normalised Kendall-Tau distances")
who = list(orders)
for a in who:
    print(f"  {a:10s}", " ".join(f"{kendall_tau(orders[a], orders[b]):.2f}" for b in who))

print("\nConsensus rankings (score = summed distance to the four views, lower is better)")
for method in ("borda", "footrule", "copeland", "bestofk", "mc4", "kemeny"):
    raw = AGGREGATORS[method](profile)
    out = local_improvement(raw, profile)
    tag = "" if out == raw else f"  (local improvement: {kt_score(raw, profile):.3f} -> {kt_score(out, profile):.3f})"
    print(f"  {method:9s} {kt_score(out, profile):.3f}  {' > '.join(sectors[i] for i in out.ranking)}{tag}")

# the exact optimum is a floor for every heuristic
best = kt_score(AGGREGATORS["kemeny"](profile), profile)
assert all(kt_score(AGGREGATORS[m](profile), profile) >= best - 1e-12 for m in AGGREGATORS)
print(f"\nNo consensus ranking can score below {best:.3f}; with {len(sectors)} sectors the views are "
      f"{np.mean([kendall_tau(orders[a], orders[b]) for a in who for b in who if a < b]):.2f} apart on average.")
