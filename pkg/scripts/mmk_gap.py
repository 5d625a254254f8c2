#!/usr/bin/env python3
"""How far the M/M/k optimum sits below the M/M/1 approximation as the market grows."""
from gigdeploy.extensions import MMK, ExtensionConfig, solve_deployment_general
from gigdeploy.hybrid import solve_deployment
from gigdeploy.model_core import MarketParams

print(f"{'Lambda':>7} {'K':>7} {'pi MM1':>10} {'pi MMk':>10} {'rel gap':>8}")
for lam in (30.0, 120.0, 480.0):
    for K in sorted({55.0, 55.0 * lam / 30.0}):
        p = MarketParams(Lambda=lam, K=K)
        a = solve_deployment(p).pi_star
        b = solve_deployment_general(p, ExtensionConfig(queue_model=MMK)).pi_star
        print(f"{lam:7.0f} {K:7.0f} {a:10.4f} {b:10.4f} {(a - b) / a:8.4f}")
