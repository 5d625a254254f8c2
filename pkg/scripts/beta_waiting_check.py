#!/usr/bin/env python3
"""Regime H along w_s at K=50 under uniform and Beta(1,40) waiting sensitivity.

Each hybrid optimum is rechecked by a crude multistart Nelder-Mead over
(p_s, log W_s, p_o, log W_o) that only uses the demand split.
"""
import math

import numpy as np

from gigdeploy.extensions import ExtensionConfig, solve_deployment_general
from gigdeploy.model_core import Heterogeneity, MarketParams, demand_split
from gigdeploy.numerics import nelder_mead_max


def direct_hybrid(p, rng, starts=20):
    def f(x):
        p_s, W_s, p_o, W_o = x[0], math.exp(x[1]), x[2], math.exp(x[3])
        ls, lo = demand_split(p_s, W_s, p_o, W_o, p)
        k_s = 1 / W_s + ls
        k_o = 1 / W_o + lo
        return p_s * ls - p.w_s * k_s + p_o * lo - k_o * k_o / p.K
    best = -math.inf
    for _ in range(starts):
        x0 = np.array([rng.uniform(1.0, 2.0), math.log(rng.uniform(0.02, 1)),
                       rng.uniform(1.0, 2.0), math.log(rng.uniform(0.02, 1))])
        _, fx, _ = nelder_mead_max(f, x0, step=[0.1, 0.3, 0.1, 0.3])
        best = max(best, fx)
    return best


rng = np.random.default_rng(3)
for label, dist in (("uniform", Heterogeneity()), ("beta(1,40)", Heterogeneity("beta", 1.0, 40.0))):
    cfg = ExtensionConfig(theta_dist=dist)
    print(label)
    for w in np.linspace(1 / 12, 1.0, 12):
        p = MarketParams(w_s=float(w), K=50.0)
        sol = solve_deployment_general(p, cfg)
        gain = 1 - max(sol.pi_s, sol.pi_o) / sol.pi_star
        check = direct_hybrid(cfg.apply(p), rng) if w in (1 / 12, 0.5) else float("nan")
        print(f"  w_s={w:.3f} {sol.regime.value:>3} pi*={sol.pi_star:.5f} gain={gain:.4f} direct={check:.5f}")
