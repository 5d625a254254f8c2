import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from gigdeploy.errors import DomainError
from gigdeploy.hybrid import (OL, classify_regime_map, classify_t1_t2, ol_lambda_bound,
                              pi_one, pi_two, proliferation_effect_standard, profit_ol, profit_sl,
                              region_boundary, solve_deployment, solve_hybrid, wo_interior_ol,
                              wo_interior_sl, ws_given_ol, ws_given_sl)
from gigdeploy.model_core import MarketParams, Regime
from gigdeploy.oracle import brute_force_hybrid, objective_h
from gigdeploy.single_service import solve_system_s
from gigdeploy.sweeps import regime_grid


def test_ws_given_examples(base):
    W0 = math.sqrt(0.5 / 30)
    assert math.isclose(ws_given_ol(0.0, base), W0, rel_tol=1e-15)
    assert math.isclose(ws_given_sl(0.0, base), W0, rel_tol=1e-15)
    assert math.isclose(ws_given_ol(15.0, base), math.sqrt(15 / 675), rel_tol=1e-14)
    assert abs(ws_given_ol(15.0, base) - 0.14907) < 1e-5
    assert math.isclose(ws_given_sl(15.0, base), math.sqrt(15) / 15, rel_tol=1e-14)
    assert ws_given_ol(30 - 1e-9, base) > 1e3
    with pytest.raises(DomainError):
        ws_given_ol(30.0, base)


@given(st.floats(0.0, 29.99))
def test_ws_sl_dominates_ol(lam_o):
    p = MarketParams()
    assert ws_given_sl(lam_o, p) >= ws_given_ol(lam_o, p) * (1 - 1e-15)


def test_wo_interior_ol_example():
    # independent root of 1500 W^3 = 2 + 60 W; the 0.2105 quoted alongside it is off (ledger)
    p = MarketParams(K=50.0)
    ref = brentq(lambda W: 1500 * W ** 3 - 2 - 60 * W, 1e-6, 10)
    assert math.isclose(wo_interior_ol(30.0, p), ref, rel_tol=1e-12)
    assert abs(ref - 0.21495) < 1e-5


@given(st.floats(0.05, 29.95), st.floats(5, 200))
def test_interior_foc_residuals(lam_o, K):
    p = MarketParams(K=K)
    lam, mu = p.Lambda, p.mu_o
    W = wo_interior_ol(lam_o, p)
    r = lam_o ** 2 * W ** 3 / lam - 2 * (1 + lam_o * W) / (K * mu * mu)
    assert abs(r) <= 1e-12 * 2 * (1 + lam_o * W) / (K * mu * mu)
    Wc = wo_interior_sl(lam_o, p)
    r = lam_o * (2 * lam - lam_o) * Wc ** 3 / lam - 2 * (1 + lam_o * Wc) / (K * mu * mu)
    assert abs(r) <= 1e-12 * 2 * (1 + lam_o * Wc) / (K * mu * mu)
    assert Wc < W
    assert wo_interior_ol(lam_o, p.with_(K=K * 1.5)) < W


def test_interior_roots_coincide_at_full_flow(base):
    assert math.isclose(wo_interior_ol(30.0, base), wo_interior_sl(30.0, base), rel_tol=1e-14)
    with pytest.raises(DomainError):
        wo_interior_ol(0.0, base)


def test_region_boundary_limit_and_sandwich(base):
    W0 = math.sqrt(0.5 / 30)
    assert math.isclose(region_boundary(0.0, base), W0, rel_tol=1e-15)
    assert math.isclose(region_boundary(1e-6, base), W0, rel_tol=1e-6)
    for lam_o in np.linspace(0.5, 29.5, 30):
        b = region_boundary(lam_o, base)
        first = b < pi_one(base) / (2 * lam_o)
        if first:
            assert ws_given_ol(lam_o, base) < b < ws_given_sl(lam_o, base)


def test_region_boundary_negative_when_standard_unprofitable():
    p = MarketParams(V=0.5, w_s=1.0)
    assert pi_one(p) < 0 and region_boundary(3.0, p) < 0


def test_profit_branch_edges(base):
    W_big = 1e12
    assert math.isclose(profit_ol(0.0, W_big, base), solve_system_s(base).profit, rel_tol=1e-9)
    for W in (0.1, 0.3):
        assert math.isclose(profit_sl(30.0, W, base), pi_two(30.0, W, base), rel_tol=1e-15)
    with pytest.raises(DomainError):
        profit_ol(1.0, 0.3, base.with_(w_s=2.0))
    bound = ol_lambda_bound(base)
    assert profit_ol(min(29.99, bound + 0.5), 0.3, base) == -math.inf


@given(st.floats(0.5, 29.0), st.floats(0.05, 2.0))
def test_branch_objectives_match_raw_oracle(lam_o, W_o):
    p = MarketParams()
    lam_s = p.Lambda - lam_o
    Ws = ws_given_ol(lam_o, p)
    if W_o >= Ws and lam_o <= ol_lambda_bound(p):
        assert math.isclose(profit_ol(lam_o, W_o, p), float(objective_h(lam_s, Ws, lam_o, W_o, p)),
                            rel_tol=1e-10, abs_tol=1e-10)
    Ws = ws_given_sl(lam_o, p)
    if W_o <= Ws:
        assert math.isclose(profit_sl(lam_o, W_o, p), float(objective_h(lam_s, Ws, lam_o, W_o, p)),
                            rel_tol=1e-10, abs_tol=1e-10)


def test_base_point_is_hybrid(base):
    sol = solve_deployment(base)
    assert sol.regime.is_hybrid and sol.pi_h > max(sol.pi_s, sol.pi_o)
    h = sol.chosen
    assert math.isclose(h.standard.arrival_rate + h.ondemand.arrival_rate, 30.0, rel_tol=1e-12)
    orc = brute_force_hybrid(base, single=False)
    assert abs(orc.profit - sol.pi_star) / sol.pi_star < 5e-3
    assert orc.profit <= sol.pi_star * (1 + 1e-9)


def test_prices_follow_branch_rule():
    for w, K in ((0.5, 55.0), (0.9, 45.0), (0.3, 20.0), (0.95, 38.0)):
        p = MarketParams(w_s=w, K=K)
        h = solve_hybrid(p)
        if h is None:
            continue
        s, o = h.standard, h.ondemand
        if h.branch == OL:
            assert o.lead_time >= s.lead_time
            assert math.isclose(s.price, p.V - s.lead_time, abs_tol=1e-9)
        else:
            assert o.lead_time <= s.lead_time
            assert math.isclose(o.price, p.V - o.lead_time, abs_tol=1e-9)
        assert (h.regime is Regime.H1) == (o.lead_time > s.lead_time)


def test_small_wage_hybrid_tends_to_standard(base):
    # the on-demand share shrinks with w_s and drops below the degeneracy cutoff
    p = base.with_(w_s=0.01)
    h = solve_hybrid(p)
    assert h.lambda_o_star < 0.01 and 0 < h.profit - solve_system_s(p).profit < 1e-4
    p = base.with_(w_s=1e-4)
    assert solve_hybrid(p) is None
    assert solve_deployment(p).regime is Regime.S


def test_large_K_and_wage_give_O(base):
    assert solve_deployment(base.with_(w_s=1.0, K=100.0)).regime is Regime.O
    assert solve_deployment(base.with_(w_s=2.0, K=100.0)).regime is Regime.O


def test_hybrid_beats_standard_near_zero_on_demand_flow(base):
    # the hybrid profile's slope at lambda_o = 0+ is w_s / mu_s > 0, so a sliver of
    # on-demand traffic always improves on System S when w_s > 0
    for w in (0.02, 0.1, 0.3):
        p = base.with_(w_s=w, K=10.0)
        sol = solve_deployment(p)
        assert sol.pi_h > sol.pi_s


@pytest.mark.xfail(strict=True, reason="regime S never wins for w_s > 0 in the base model; "
                   "see decisions ledger")
def test_standard_only_regime_exists_at_small_K_and_wage(base):
    assert solve_deployment(base.with_(w_s=0.02, K=10.0)).regime is Regime.S


@given(st.floats(0.05, 1.0), st.floats(10, 100), st.floats(1.05, 1.5))
def test_hybrid_monotone(w, K, f):
    p = MarketParams(w_s=w, K=K)
    a = solve_deployment(p).pi_star
    assert solve_deployment(p.with_(K=min(K * f, 200))).pi_star >= a - 1e-7 * a
    assert solve_deployment(p.with_(w_s=w * f)).pi_star <= a + 1e-7 * a


def test_regime_map_pattern_small_grid(base):
    rmap = classify_regime_map(base, regime_grid(16, 16), check=True)
    assert {"H", "O"} <= set(rmap.counts())


def test_standard_effect_signs(base):
    for w, K in ((0.5, 55.0), (0.2, 30.0), (0.8, 40.0)):
        eff = proliferation_effect_standard(base.with_(w_s=w, K=K))
        assert eff.dp_s < 0 and eff.dW_s > 0


def test_standard_effect_grows_with_on_demand_flow(base):
    W0 = ws_given_ol(0.0, base)
    ws = [ws_given_ol(l, base) - W0 for l in np.linspace(0, 29, 30)]
    assert all(b > a for a, b in zip(ws, ws[1:]))


def test_t1_t2_examples(base):
    t1 = classify_t1_t2(base.with_(K=10.0, w_s=7 / 12))
    assert t1.label == "T1" and t1.dp_o <= 0 and t1.dW_o >= 0
    t2 = classify_t1_t2(base.with_(K=10 + 720 / 23, w_s=11 / 12))
    assert t2.label == "T2" and t2.dp_o >= 0 and t2.dW_o <= 0


def test_t1_t2_needs_hybrid(base):
    with pytest.raises(DomainError):
        classify_t1_t2(base.with_(w_s=1.0, K=100.0))


def test_on_demand_price_effect_flips_along_K50(base):
    # H1 points raise p_o relative to System O at K=50, H2 points lower W_o
    rows = []
    for w in np.linspace(0.05, 1.0, 20):
        p = base.with_(K=50.0, w_s=float(w))
        sol = solve_deployment(p)
        if sol.regime.is_hybrid:
            rows.append((sol.regime, sol.chosen.ondemand.lead_time - sol.system_o.channel.lead_time))
    h1 = [d for r, d in rows if r is Regime.H1]
    h2 = [d for r, d in rows if r is Regime.H2]
    assert h1 and h2 and min(h1) > 0 and max(h2) < 0
