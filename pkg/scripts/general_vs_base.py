#!/usr/bin/env python3
"""The extension solver with base settings against the closed-form solver on random draws."""
import argparse

from gigdeploy.experiments import sample_instances
from gigdeploy.extensions import ExtensionConfig, solve_deployment_general
from gigdeploy.hybrid import solve_deployment

ap = argparse.ArgumentParser()
ap.add_argument("--draws", type=int, default=25)
ap.add_argument("--seed", type=int, default=2024)
args = ap.parse_args()

worst = 0.0
for p in sample_instances(args.draws, args.seed):
    a, b = solve_deployment_general(p, ExtensionConfig()), solve_deployment(p)
    gap = max(abs(x - y) / abs(y) for x, y in ((a.pi_s, b.pi_s), (a.pi_o, b.pi_o), (a.pi_star, b.pi_star)))
    worst = max(worst, gap)
    flag = "" if a.regime is b.regime else "  regime differs"
    print(f"V={p.V:.3f} Lambda={p.Lambda:.2f} w_s={p.w_s:.3f} K={p.K:6.2f} "
          f"{b.regime.value:>3} gap {gap:.1e}{flag}")
print(f"worst relative gap {worst:.2e}")
