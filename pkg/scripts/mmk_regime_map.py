#!/usr/bin/env python3
"""Regime map under M/M/k lead times next to the M/M/1 map on the same grid.

A 48x48 grid takes about an hour on one core; the default 12x12 a few minutes.
"""
import argparse
import time

from gigdeploy.extensions import MMK, ExtensionConfig, regime_map_general
from gigdeploy.hybrid import classify_regime_map
from gigdeploy.model_core import MarketParams
from gigdeploy.sweeps import regime_grid

ap = argparse.ArgumentParser()
ap.add_argument("--n", type=int, default=12)
ap.add_argument("--jobs", type=int, default=1)
args = ap.parse_args()

grid = regime_grid(args.n, args.n)
t0 = time.perf_counter()
mmk = regime_map_general(MarketParams(), ExtensionConfig(queue_model=MMK), grid, jobs=args.jobs, check=False)
secs = time.perf_counter() - t0
mm1 = classify_regime_map(MarketParams(), grid, check=False)

print("rows run over K (low to high), columns over w_s (low to high)")
print(f"{'K':>7}  {'M/M/k':<{args.n}}  M/M/1")
for i, K in enumerate(grid.axes[0].values):
    a = "".join(mmk.bands()[i])
    b = "".join(mm1.bands()[i])
    print(f"{K:7.2f}  {a}  {b}")
print("M/M/k counts", mmk.counts(), "violations", mmk.pattern_violations(), f"{secs:.0f}s")
print("M/M/1 counts", mm1.counts())
