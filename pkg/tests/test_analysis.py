import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from gigdeploy.analysis import (Coordination, construct_dedicated_prices, coordination_direct,
                                coordination_region, empty_configuration, flexible_equivalence_check,
                                flexible_flows, flexible_profit, profit_ratio, proliferation_value,
                                ratio_bounds, threshold_curves)
from gigdeploy.errors import DomainError
from gigdeploy.hybrid import solve_deployment
from gigdeploy.model_core import MarketParams, demand_split
from gigdeploy.single_service import c_bar_s, solve_system_o, solve_system_s
from gigdeploy.welfare import lw_peak_o, welfare_system_o, welfare_system_s


def test_base_ratio_and_bounds(base):
    assert abs(profit_ratio(base) - 1.17401) < 1e-5
    lo, hi = ratio_bounds(base)
    assert abs(lo - 0.6209) < 1e-4 and abs(hi - 1.8908) < 1e-4


@given(st.floats(1.7, 2.5), st.floats(25, 35), st.floats(0.01, 1.0), st.floats(10, 100))
def test_ratio_identity_and_bounds(V, lam, w, K):
    p = MarketParams(V=V, Lambda=lam, w_s=w, K=K)
    R = profit_ratio(p)
    assert math.isclose(R * solve_system_o(p).profit, solve_system_s(p).profit, rel_tol=1e-10)
    lo, hi = ratio_bounds(p)
    assert lo - 1e-12 <= R <= hi + 1e-12


def test_ratio_large_pool_limit(base):
    lo = ratio_bounds(base)[0]
    gaps = [profit_ratio(base.with_(K=K)) - lo for K in (1e4, 1e6, 1e8, 1e10)]
    assert all(g > 0 for g in gaps) and all(b < a for a, b in zip(gaps, gaps[1:]))
    # the gap decays like K^(-1/3): about 2e-3 at 1e6, under 1e-3 only near 1e7
    assert 1.5e-3 < gaps[1] < 2.5e-3 and gaps[3] < 1e-4


def test_ratio_needs_operating_standard():
    with pytest.raises(DomainError):
        profit_ratio(MarketParams(V=0.3, w_s=0.5))


def test_ratio_below_one_iff_above_kF(base):
    kF = threshold_curves(0.5, base).k_F
    assert profit_ratio(base.with_(K=kF * 1.001)) < 1 < profit_ratio(base.with_(K=kF * 0.999))


def test_base_thresholds(base):
    c = threshold_curves(0.5, base)
    assert abs(c.k_F - 72.88) < 0.01 and abs(c.k_S - 150.98) < 0.01
    assert c.k_L_lo == c.k_L_hi == math.inf
    assert abs(c.k_C_lo - 25.31) < 0.01 and abs(c.k_C_hi - 150.98) < 0.01


def test_thresholds_match_brentq(base):
    c = threshold_curves(0.3, base)
    p = base.with_(w_s=0.3)
    s_pi, s_sw = solve_system_s(p).profit, welfare_system_s(p).sw
    kF = brentq(lambda K: solve_system_o(p.with_(K=K)).profit - s_pi, 1, 1e5, xtol=1e-12)
    kS = brentq(lambda K: welfare_system_o(p.with_(K=K)).sw - s_sw, 1, 1e5, xtol=1e-12)
    assert math.isclose(c.k_F, kF, rel_tol=1e-9) and math.isclose(c.k_S, kS, rel_tol=1e-9)


@pytest.mark.parametrize("w", [0.05, 0.2, 0.5, 0.9])
def test_threshold_ordering_flips(base, w):
    c = threshold_curves(w, base)
    p = base.with_(w_s=w)
    s = welfare_system_s(p)
    pairs = {"k_F": "profit", "k_S": "sw", "k_L_lo": "lw", "k_L_hi": "lw",
             "k_C_lo": "cs", "k_C_hi": "cs"}
    for name, metric in pairs.items():
        K = getattr(c, name)
        if not math.isfinite(K) or K <= 0:
            continue
        a = welfare_system_o(p.with_(K=K * (1 - 1e-7))).get(metric) - s.get(metric)
        b = welfare_system_o(p.with_(K=K * (1 + 1e-7))).get(metric) - s.get(metric)
        assert a * b < 0


def test_lw_infinite_when_standard_beats_peak(base):
    p = base.with_(w_s=0.5)
    assert welfare_system_s(p).lw > lw_peak_o(p)
    c = threshold_curves(0.5, p)
    assert c.k_L_lo == c.k_L_hi == math.inf


def test_kF_decreasing_and_below_kC_hi(base):
    ws = np.linspace(0.02, 1.0, 50)
    cs = [threshold_curves(float(w), base) for w in ws]
    kF = [c.k_F for c in cs]
    assert all(b < a for a, b in zip(kF, kF[1:]))
    assert all(c.k_F < c.k_C_hi for c in cs)


def test_threshold_needs_positive_wage(base):
    with pytest.raises(DomainError):
        threshold_curves(0.0, base)


def test_coordination_examples(base):
    assert coordination_region(base) is Coordination.NONE
    assert coordination_region(base.with_(K=1.0, w_s=0.1)) is Coordination.STANDARD
    assert coordination_region(base.with_(K=1e5)) is Coordination.NONE


def test_coordination_agrees_with_direct(base):
    for w in np.linspace(0.02, 1.0, 12):
        c = threshold_curves(float(w), base)
        for K in np.linspace(1, 200, 12):
            p = base.with_(w_s=float(w), K=float(K))
            assert coordination_region(p) is coordination_direct(p)
            assert not empty_configuration(c, float(K)) or coordination_region(p) is Coordination.NONE


def test_base_proliferation(base):
    rep = proliferation_value(base)
    assert abs(rep.delta_o - 0.0371) < 1e-4 and abs(rep.delta_s - 0.1798) < 1e-4
    assert 0 <= rep.delta_o <= c_bar_s(base) / base.V
    assert set(rep.welfare_deltas) == {f"delta_{c}_{m}" for c in "os" for m in ("cs", "lw", "sw")}


def test_proliferation_zero_when_standard_optimal(base):
    p = base.with_(w_s=1e-4)
    assert solve_deployment(p).regime.value == "S"
    assert proliferation_value(p).delta_o == 0.0


def test_proliferation_monotone(base):
    d_o = [proliferation_value(base.with_(K=float(K))).delta_o for K in np.linspace(10, 100, 32)]
    assert all(b >= a - 1e-9 for a, b in zip(d_o, d_o[1:]))
    d_s = [proliferation_value(base.with_(w_s=float(w))).delta_s for w in np.linspace(0.05, 1, 32)]
    assert all(b <= a + 1e-9 for a, b in zip(d_s, d_s[1:]))


def test_flexible_zero_q_is_dedicated(base):
    sol = solve_deployment(base)
    s, o = sol.chosen.standard, sol.chosen.ondemand
    val = flexible_profit(s.price, o.price, s.lead_time, o.lead_time, 0.0, 0.0, base)
    assert math.isclose(val, sol.pi_star, rel_tol=1e-9)


def test_flexible_flows_reduce_to_demand_split(base):
    b_s, b_o, lam_s, lam_o = flexible_flows(1.8, 1.7, 0.13, 0.3, 0.0, 0.0, base)
    assert (lam_s, lam_o) == pytest.approx(demand_split(1.8, 0.13, 1.7, 0.3, base))


@given(st.floats(1.5, 1.95), st.floats(1.5, 1.95), st.floats(0.05, 0.2), st.floats(0.21, 0.5),
       st.floats(0, 0.45), st.floats(0, 0.45))
@settings(max_examples=80)
def test_constructed_prices_reproduce_arrivals(p_s, p_o, W_s, W_o, q_s, q_o):
    p = MarketParams()
    b_s, b_o, lam_s, lam_o = flexible_flows(p_s, p_o, W_s, W_o, q_s, q_o, p)
    new = construct_dedicated_prices(p_s, p_o, W_s, W_o, q_s, q_o, p)
    a_s, a_o = demand_split(new[0], W_s, new[1], W_o, p)
    assert a_s + a_o == pytest.approx(lam_s + lam_o, abs=1e-9)


@pytest.mark.slow
def test_flexible_check_base(base):
    chk = flexible_equivalence_check(base, grid_n=8)
    assert chk.passed, chk.max_gap
    assert math.isclose(chk.dedicated_value, chk.pi_star, rel_tol=1e-9)
    assert len(chk.cells) == 36


def test_flexible_grid_size_guard(base):
    with pytest.raises(DomainError):
        flexible_equivalence_check(base, grid_n=4)
