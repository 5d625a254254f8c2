#!/usr/bin/env python3
"""Count regime-H cells whose interior optimum satisfies the T1 or T2 systems."""
import argparse
from collections import Counter

from gigdeploy.hybrid import classify_t1_t2, solve_deployment
from gigdeploy.model_core import MarketParams
from gigdeploy.sweeps import regime_grid

ap = argparse.ArgumentParser()
ap.add_argument("--n", type=int, default=24)
args = ap.parse_args()

grid = regime_grid(args.n, args.n)
tally = Counter()
sign_hits = Counter()
for pt in grid.points():
    p = grid.apply(MarketParams(), pt)
    sol = solve_deployment(p)
    if not sol.regime.is_hybrid:
        continue
    eff = classify_t1_t2(p, sol)
    key = (sol.regime.value, sol.chosen.branch, "interior" if sol.chosen.interior else "boundary", eff.label)
    tally[key] += 1
    if eff.dp_o <= 0 <= eff.dW_o:
        sign_hits["p_o down, W_o up"] += 1
    elif eff.dW_o <= 0 <= eff.dp_o:
        sign_hits["p_o up, W_o down"] += 1
    else:
        sign_hits["same direction"] += 1
for key, n in sorted(tally.items()):
    print(*key, n)
print(dict(sign_hits))
