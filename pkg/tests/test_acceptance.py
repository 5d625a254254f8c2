"""Acceptance criteria 1-13.

Each test prints one line "criterion N: PASS|FAIL ..." to the terminal, even
under output capture. Run with `pytest tests/test_acceptance.py -v`.
Total runtime is roughly 11 minutes on one core.
"""
import math
import time
import warnings

import numpy as np
import pytest

from gigdeploy.analysis import (coordination_direct, coordination_from_thresholds,
                                empty_configuration, flexible_equivalence_check, profit_ratio,
                                proliferation_value, ratio_bounds, threshold_curves)
from gigdeploy.cli import main
from gigdeploy.errors import GridTooCoarse
from gigdeploy.experiments import DES_POINTS, sample_instances
from gigdeploy.extensions import MMK, ExtensionConfig, regime_map_general, solve_deployment_general
from gigdeploy.hybrid import classify_regime_map, solve_deployment
from gigdeploy.model_core import (Heterogeneity, MarketParams, lead_time_mm1, lead_time_mmk)
from gigdeploy.oracle import (SimConfig, analytic_shares, brute_force_hybrid, brute_force_single_o,
                              brute_force_single_s, simulate_market, simulate_queue)
from gigdeploy.single_service import c_bar_s, k_bar, l_bar_o, solve_system_o, solve_system_s
from gigdeploy.sweeps import regime_grid
from gigdeploy.welfare import welfare_of, welfare_system_o, welfare_system_s

pytestmark = pytest.mark.acceptance

SEED = 12345
N_DRAWS = 100


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def draws():
    t0 = time.perf_counter()
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridTooCoarse)
        for p in sample_instances(N_DRAWS, SEED):
            sol = solve_deployment(p)
            o_s = brute_force_single_s(p)[0]
            o_o = brute_force_single_o(p)[0]
            o_h = max(brute_force_hybrid(p, single=False).profit, o_s, o_o)
            out.append((p, sol, o_s, o_o, o_h))
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def base_map():
    t0 = time.perf_counter()
    rmap = classify_regime_map(MarketParams(), regime_grid(64, 64), check=False, keep_solutions=True)
    return rmap, time.perf_counter() - t0


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_closed_form_vs_oracle(draws, report):
    rows, secs = draws
    worst = {"S": 0.0, "O": 0.0, "deploy": 0.0}
    for p, sol, o_s, o_o, o_h in rows:
        worst["S"] = max(worst["S"], _rel(sol.pi_s, o_s))
        worst["O"] = max(worst["O"], _rel(sol.pi_o, o_o))
        worst["deploy"] = max(worst["deploy"], _rel(sol.pi_star, o_h))
    ok = max(worst.values()) <= 5e-3 and secs <= 1800
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    assert report(1, ok, f"max rel gap over {N_DRAWS} draws: {detail} (tol 5e-3); {secs:.0f}s")


def _jump(a, b):
    if a == b:
        return 0.0
    if not (math.isfinite(a) and math.isfinite(b)):
        return math.inf
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_criterion_02_branch_continuity(report):
    worst_K = worst_V_profit = worst_V_rest = 0.0
    for w in (0.1, 0.5, 0.9):
        for V, lam in ((2.0, 30.0), (1.8, 25.0), (2.4, 35.0)):
            p = MarketParams(V=V, Lambda=lam, w_s=w)
            kb = k_bar(p)
            for eps in (1e-10, 1e-12):
                a = solve_system_o(p.with_(K=kb * (1 - eps)))
                b = solve_system_o(p.with_(K=kb * (1 + eps)))
                for f in (lambda s: s.profit, lambda s: s.channel.price,
                          lambda s: s.channel.lead_time):
                    worst_K = max(worst_K, _jump(f(a), f(b)))
            cs = c_bar_s(p)
            a = solve_system_s(p.with_(V=cs * (1 + 1e-12)))
            b = solve_system_s(p.with_(V=cs * (1 - 1e-12)))
            # profit is ~0 on both sides: compare against the scale V * Lambda
            worst_V_profit = max(worst_V_profit, abs(a.profit - b.profit) / (cs * lam))
            for f in (lambda s: s.channel.price, lambda s: s.channel.lead_time):
                worst_V_rest = max(worst_V_rest, _jump(f(a), f(b)))
    ok = max(worst_K, worst_V_profit, worst_V_rest) < 1e-8
    assert report(2, ok, f"K=k_bar jump {worst_K:.1e}; V=c_bar_s profit jump {worst_V_profit:.1e}, "
                  f"price/lead-time jump {worst_V_rest:.3g} (System S shuts down below c_bar_s)")


def test_criterion_03_ratio_bounds(draws, report):
    rows, _ = draws
    bad = 0
    for p, *_ in rows:
        R = profit_ratio(p)
        lo, hi = ratio_bounds(p)
        bad += not (lo - 1e-12 <= R <= hi + 1e-12)
    p = MarketParams(K=1e6)
    gap = profit_ratio(p) - ratio_bounds(p)[0]
    ok = bad == 0 and gap <= 1e-3
    assert report(3, ok, f"bound violations {bad}/{len(rows)}; K=1e6 gap to lower bound {gap:.3e} "
                  f"(tol 1e-3)")


def test_criterion_04_wage_price_ratio(report):
    worst, n = 0.0, 0
    for p in sample_instances(200, SEED + 4):
        for K in np.linspace(1.0, k_bar(p) * 0.999, 8):
            ch = solve_system_o(p.with_(K=float(K))).channel
            worst = max(worst, abs(ch.wage / ch.price - 0.5))
            n += 1
    assert report(4, worst <= 1e-12, f"max |w_o/p_o - 1/2| = {worst:.1e} over {n} points with K < k_bar")


def test_criterion_05_regime_map(base_map, report):
    rmap, secs = base_map
    counts = rmap.counts()
    bad = rmap.pattern_violations()
    ok = set(counts) >= {"S", "H", "O"} and not bad and secs <= 300
    assert report(5, ok, f"64x64 bands {counts}; pattern violations {len(bad)}; {secs:.0f}s "
                  "(regime S needs all three; hybrid beats S for every w_s > 0 on this grid)")


def test_criterion_06_standard_price_effect(base_map, report):
    rmap, _ = base_map
    n = bad = 0
    for sol in rmap.solutions:
        if not sol.regime.is_hybrid:
            continue
        n += 1
        s_h, s_s = sol.chosen.standard, sol.system_s.channel
        bad += not (s_h.price < s_s.price and s_h.lead_time > s_s.lead_time)
    assert report(6, n > 0 and bad == 0, f"{bad} of {n} regime-H cells break p_s^H < p_s^S, W_s^H > W_s^S")


def test_criterion_07_proliferation_bounds(draws, report):
    rows, _ = draws
    bad = 0
    for p, sol, *_ in rows:
        rep = proliferation_value(p, sol, check=False)
        L = l_bar_o(p)
        c_o = L * (3.0 + L) / (2.0 * p.Lambda)
        tol = 1e-12
        bad += not (-tol <= rep.delta_o <= c_bar_s(p) / p.V + tol)
        bad += not (-tol <= rep.delta_s <= c_o / p.V + tol)
    base = MarketParams()
    d_o = [proliferation_value(base.with_(K=float(K))).delta_o for K in np.linspace(10, 100, 32)]
    d_s = [proliferation_value(base.with_(w_s=float(w))).delta_s for w in np.linspace(1 / 32, 1, 32)]
    mono_o = sum(b < a - 1e-9 for a, b in zip(d_o, d_o[1:]))
    mono_s = sum(b > a + 1e-9 for a, b in zip(d_s, d_s[1:]))
    ok = bad == 0 and mono_o == 0 and mono_s == 0
    assert report(7, ok, f"bound violations {bad}; K-sweep decreases {mono_o}; w_s-sweep increases {mono_s}")


def _unimodal_at(values, Ks, kb):
    d = np.diff(values)
    up = d[Ks[1:] <= kb]
    down = d[Ks[:-1] >= kb]
    return bool(np.all(up > 0) and np.all(down < 0))


def test_criterion_08_welfare_identity(draws, report):
    rows, _ = draws
    worst = 0.0
    for p, sol, *_ in rows:
        for rep in (welfare_system_s(p), welfare_system_o(p), welfare_of(sol, p)):
            worst = max(worst, rep.identity_residual / max(1.0, abs(rep.sw)))
    p = MarketParams()
    Ks = np.geomspace(1, 5000, 300)
    reps = [welfare_system_o(p.with_(K=float(K))) for K in Ks]
    kb = k_bar(p)
    uni = all(_unimodal_at(np.array([r.get(m) for r in reps]), Ks, kb) for m in ("lw", "cs"))
    ok = worst <= 1e-8 and uni
    assert report(8, ok, f"max identity residual {worst:.1e}; LW^O, CS^O unimodal with peak at k_bar: {uni}")


def test_criterion_09_coordination(report):
    base = MarketParams()
    ws = np.linspace(1 / 48, 1.0, 48)
    Ks = np.linspace(10, 100, 48)
    mismatch = empty = 0
    for w in ws:
        curves = threshold_curves(float(w), base)
        for K in Ks:
            p = base.with_(w_s=float(w), K=float(K))
            if coordination_from_thresholds(curves, float(K)) is not coordination_direct(p):
                mismatch += 1
            empty += empty_configuration(curves, float(K))
    ok = mismatch == 0 and empty == 0
    assert report(9, ok, f"48x48 mismatches {mismatch}; empty-configuration cells {empty}")


def test_criterion_10_flexible_servers(report):
    worst, failed, unconv = -math.inf, 0, 0
    for p in sample_instances(10, SEED + 10):
        chk = flexible_equivalence_check(p, grid_n=16)
        worst = max(worst, chk.max_gap / max(1.0, abs(chk.pi_star)))
        failed += not chk.passed
        unconv += len(chk.unconverged)
    assert report(10, failed == 0, f"max (pi_f - pi*)/max(1, pi*) = {worst:.2e} (tol 1e-6) over 10 draws; "
                  f"{failed} draws failed; {unconv} cells hit the iteration cap")


def test_criterion_11_simulation(report):
    sim = SimConfig(horizon_services=1_000_000, seed=SEED)
    gaps = []
    for k, mu, lam in DES_POINTS:
        ref = lead_time_mm1(k, mu, lam) if k == 1 else lead_time_mmk(k, mu, lam)
        m, _ = simulate_queue(k, mu, lam, sim)
        gaps.append(abs(m - ref) / ref)
    zs = []
    for p in [MarketParams(), MarketParams(w_s=0.9, K=40.0),
              MarketParams(theta_dist=Heterogeneity("beta", 2.0, 5.0))]:
        sol = solve_deployment(p.with_(theta_dist=Heterogeneity()))
        pol = sol.channels()
        mc = simulate_market(pol, p, SimConfig(horizon_services=100_000, seed=SEED))
        ls, lo = analytic_shares(pol, p)
        for got, se, ref in ((mc.lambda_s, mc.se_lambda_s, ls), (mc.lambda_o, mc.se_lambda_o, lo)):
            if se > 0:
                zs.append(abs(got - ref) / se)
    ok = max(gaps) <= 0.02 and max(zs) <= 3.0
    assert report(11, ok, "DES rel gaps " + ", ".join(f"{g:.2e}" for g in gaps)
                  + f" (tol 2e-2); max market-share z {max(zs):.2f} (tol 3)")


def _h_count(cfg, ws, K=50.0):
    n, gain = 0, []
    for w in ws:
        sol = solve_deployment_general(MarketParams(w_s=float(w), K=K), cfg)
        if sol.regime.is_hybrid:
            n += 1
        gain.append(1 - max(sol.pi_s, sol.pi_o) / sol.pi_star)
    return n, gain


def test_criterion_12_extensions(report):
    base = MarketParams()
    a, b = solve_deployment_general(base, ExtensionConfig()), solve_deployment(base)
    gen = max(_rel(x, y) for x, y in ((a.pi_s, b.pi_s), (a.pi_o, b.pi_o), (a.pi_star, b.pi_star)))
    ok_gen = gen <= 1e-6 and a.regime is b.regime

    ws = np.linspace(1 / 12, 1.0, 12)
    n_u, g_u = _h_count(ExtensionConfig(), ws)
    n_b, g_b = _h_count(ExtensionConfig(theta_dist=Heterogeneity("beta", 1.0, 40.0)), ws)
    ok_beta = n_b < n_u or (n_b == n_u and all(x <= y + 1e-12 for x, y in zip(g_b, g_u)))

    def deltas(alpha):
        s = solve_deployment_general(base, ExtensionConfig(alpha=alpha))
        return 1 - s.pi_s / s.pi_star, 1 - s.pi_o / s.pi_star, s.regime

    d0, d1 = deltas(1.0), deltas(1.1)
    ok_alpha = d0[2].is_hybrid and d1[2].is_hybrid and d1[0] >= d0[0] and d1[1] <= d0[1]

    t0 = time.perf_counter()
    rmap = regime_map_general(base, ExtensionConfig(queue_model=MMK), regime_grid(10, 10), check=False)
    counts, bad = rmap.counts(), rmap.pattern_violations()
    ok_mmk = set(counts) >= {"S", "H", "O"} and not bad
    secs = time.perf_counter() - t0

    ok = ok_gen and ok_beta and ok_alpha and ok_mmk
    assert report(12, ok, f"general vs base {gen:.1e} [{'ok' if ok_gen else 'fail'}]; "
                  f"Beta(1,40) H cells {n_b} vs uniform {n_u} at K=50, mean hybrid gain "
                  f"{np.mean(g_b):.4f} vs {np.mean(g_u):.4f} [{'ok' if ok_beta else 'fail'}]; "
                  f"alpha=1.1 delta_o {d0[0]:.4f}->{d1[0]:.4f}, delta_s {d0[1]:.4f}->{d1[1]:.4f} "
                  f"[{'ok' if ok_alpha else 'fail'}]; MMk 10x10 bands {counts}, violations {len(bad)}, "
                  f"{secs:.0f}s [{'ok' if ok_mmk else 'fail'}]")


def test_criterion_13_determinism(tmp_path, report):
    blobs = []
    for jobs in (1, 8):
        out = tmp_path / f"sweep_{jobs}.csv"
        code = main(["sweep", "--sweep", "ws:0.05:1:16", "--sweep", "K:10:100:4", "--seed", "7",
                     "--jobs", str(jobs), "--out", str(out)])
        assert code == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1]
    assert report(13, ok, f"sweep CSV jobs=1 vs jobs=8 byte-identical: {ok} ({len(blobs[0])} bytes)")
