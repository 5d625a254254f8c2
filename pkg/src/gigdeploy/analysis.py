"""Comparisons across deployments: profit ratio, welfare thresholds,
coordination regions, value of proliferation, flexible-server check."""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TheoremViolation
from .hybrid import HybridSolution, solve_deployment
from .model_core import INF, demand_split
from .numerics import bisect, nelder_mead_max
from .single_service import c_bar_s, k_bar, k_from_l_bar, l_bar_o
from .welfare import welfare_of, welfare_system_o, welfare_system_s

BOUND_SLACK = 1e-9


# ---------------------------------------------------------------------------
# profit ratio

def profit_ratio(params):
    """pi^S / pi^O from the two System O branches."""
    V, lam, K, mu = params.V, params.Lambda, params.K, params.mu_o
    cs = c_bar_s(params)
    if V < cs:
        raise DomainError("profit ratio assumes System S operates (V >= c_bar_s)")
    s = math.sqrt(V * lam + 1.0)
    if K < k_bar(params):
        return 4.0 * lam ** 3 * (V - cs) / (K * mu * mu * (s - 1.0) ** 4)
    L = l_bar_o(params)
    return (V - cs) / (V - L * (3.0 + L) / (2.0 * lam))


def ratio_bounds(params):
    """(lower, upper) bounds on the profit ratio; upper is inf when V <= c_bar_o."""
    L = l_bar_o(params)
    c_o = L * (3.0 + L) / (2.0 * params.Lambda)
    lower = 1.0 - c_bar_s(params) / params.V
    upper = params.V / (params.V - c_o) if params.V > c_o else INF
    return lower, upper


# ---------------------------------------------------------------------------
# welfare and profit thresholds over K
#
# On K >= k_bar every System O metric is a function of L = l_bar_o(K), and
# K -> L is strictly decreasing with L(k_bar) = sqrt(V*Lambda + 1) - 1, so
# crossings are found by bisection in L and mapped back through k_from_l_bar.
# Below k_bar every metric is linear in K.

def _o_metric_forms(params):
    lam = params.Lambda
    s = math.sqrt(params.V * lam + 1.0)
    A = params.mu_o ** 2 * (s - 1.0) ** 4 / lam ** 2
    VL = params.V * lam
    slopes = {"profit": A / 4.0, "lw": A / 8.0, "cs": A / (4.0 * s), "sw": A * (3.0 * s + 2.0) / (8.0 * s)}
    full = {
        "profit": lambda L: VL - 0.5 * L * (3.0 + L),
        "lw": lambda L: 0.25 * L * (1.0 + L),
        "cs": lambda L: 0.5 * L,
        "sw": lambda L: VL - 0.25 * L * (3.0 + L),
    }
    return s - 1.0, slopes, full


def _root_in_l(g, L_max):
    return bisect(g, 0.0, L_max, rtol=1e-15, atol=1e-300)


def _increasing_crossing(metric, target, params):
    """K at which an increasing System O metric reaches target."""
    L_max, slopes, full = _o_metric_forms(params)
    kb = k_bar(params)
    if target <= 0.0:
        return 0.0
    if target <= slopes[metric] * kb:
        return target / slopes[metric]
    if target >= params.V * params.Lambda:
        return INF
    f = full[metric]
    L = _root_in_l(lambda l: f(l) - target, L_max)
    return k_from_l_bar(L, params)


def _unimodal_crossings(metric, target, params):
    """(lo, hi) with the unimodal System O metric above target exactly on (lo, hi)."""
    L_max, slopes, full = _o_metric_forms(params)
    kb = k_bar(params)
    peak = slopes[metric] * kb
    if target > peak:
        return INF, INF
    if target <= 0.0:
        return 0.0, INF
    lo = target / slopes[metric]
    f = full[metric]
    L = _root_in_l(lambda l: f(l) - target, L_max)
    return lo, k_from_l_bar(L, params)


@dataclass(frozen=True)
class ThresholdCurves:
    w_s: float
    k_F: float
    k_S: float
    k_L_lo: float
    k_L_hi: float
    k_C_lo: float
    k_C_hi: float

    def as_dict(self):
        return {"k_F": self.k_F, "k_S": self.k_S, "k_L_lo": self.k_L_lo,
                "k_L_hi": self.k_L_hi, "k_C_lo": self.k_C_lo, "k_C_hi": self.k_C_hi}


def threshold_curves(w_s, params):
    if not w_s > 0:
        raise DomainError("threshold curves need w_s > 0")
    p = params.with_(w_s=w_s)
    ws_rep = welfare_system_s(p)
    k_F = _increasing_crossing("profit", ws_rep.profit, p)
    k_S = _increasing_crossing("sw", ws_rep.sw, p)
    k_L = _unimodal_crossings("lw", ws_rep.lw, p)
    k_C = _unimodal_crossings("cs", ws_rep.cs, p)
    return ThresholdCurves(w_s, k_F, k_S, k_L[0], k_L[1], k_C[0], k_C[1])


# ---------------------------------------------------------------------------
# incentive coordination

class Coordination(enum.Enum):
    STANDARD = "StandardCoordinated"
    ONDEMAND = "OnDemandCoordinated"
    NONE = "None"


def coordination_from_thresholds(curves, K):
    lo = max(curves.k_F, curves.k_S, curves.k_L_lo, curves.k_C_lo)
    if lo <= K <= min(curves.k_L_hi, curves.k_C_hi):
        return Coordination.ONDEMAND
    if K <= min(curves.k_F, curves.k_S, curves.k_L_lo, curves.k_C_lo):
        return Coordination.STANDARD
    return Coordination.NONE


def coordination_direct(params):
    """Compare profit, LW, CS and SW between Systems S and O one by one."""
    s, o = welfare_system_s(params), welfare_system_o(params)
    pairs = [(o.get(m), s.get(m)) for m in ("profit", "lw", "cs", "sw")]
    if all(a >= b for a, b in pairs):
        return Coordination.ONDEMAND
    if all(a <= b for a, b in pairs):
        return Coordination.STANDARD
    return Coordination.NONE


def coordination_region(params):
    return coordination_from_thresholds(threshold_curves(params.w_s, params), params.K)


def empty_configuration(curves, K):
    """The configuration shown to be impossible: above both upper welfare
    crossings yet below both profit and SW crossings."""
    return max(curves.k_L_hi, curves.k_C_hi) <= K <= min(curves.k_F, curves.k_S)


# ---------------------------------------------------------------------------
# value of proliferation

def _delta(single, star):
    if star == 0.0:
        return math.nan
    return 1.0 - single / star


@dataclass(frozen=True)
class ProliferationReport:
    delta_o: float
    delta_s: float
    bound_o: float
    bound_s: float
    welfare_deltas: dict = field(default_factory=dict)
    regime: str = ""


def proliferation_value(params, solution=None, check=True):
    sol = solution if solution is not None else solve_deployment(params)
    star = sol.pi_star
    if not star > 0:
        raise DomainError("proliferation value needs pi* > 0")
    L = l_bar_o(params)
    rep_star = welfare_of(sol, params)
    rep_s = welfare_system_s(params)
    rep_o = welfare_system_o(params)
    wd = {}
    for m in ("cs", "lw", "sw"):
        wd[f"delta_o_{m}"] = _delta(rep_s.get(m), rep_star.get(m))
        wd[f"delta_s_{m}"] = _delta(rep_o.get(m), rep_star.get(m))
    rep = ProliferationReport(
        delta_o=_delta(sol.pi_s, star),
        delta_s=_delta(sol.pi_o, star),
        bound_o=c_bar_s(params) / params.V,
        bound_s=L * (3.0 + L) / (2.0 * params.Lambda) / params.V,
        welfare_deltas=wd,
        regime=sol.regime.value,
    )
    if check:
        ok_o = -BOUND_SLACK <= rep.delta_o <= rep.bound_o + BOUND_SLACK
        ok_s = -BOUND_SLACK <= rep.delta_s <= rep.bound_s + BOUND_SLACK
        if not (ok_o and ok_s):
            raise TheoremViolation(f"proliferation value outside its bounds: {rep}")
    return rep


# ---------------------------------------------------------------------------
# flexible servers

def effective_waits(W_s, W_o, q_s, q_o):
    """Expected waits of the two services when q_s of standard jobs go to
    contractors and q_o of on-demand jobs go to employees."""
    return (1.0 - q_s) * W_s + q_s * W_o, q_o * W_s + (1.0 - q_o) * W_o


def flexible_flows(p_s, p_o, W_s, W_o, q_s, q_o, params):
    """(buyers_s, buyers_o, lambda_s, lambda_o): buyers per price and flows per worker type."""
    We_s, We_o = effective_waits(W_s, W_o, q_s, q_o)
    b_s, b_o = demand_split(p_s, We_s, p_o, We_o, params)
    lam_s = (1.0 - q_s) * b_s + q_o * b_o
    lam_o = q_s * b_s + (1.0 - q_o) * b_o
    return b_s, b_o, lam_s, lam_o


def flexible_profit(p_s, p_o, W_s, W_o, q_s, q_o, params):
    """Flexible-system profit in (price, lead time) variables; unused worker types cost nothing."""
    b_s, b_o, lam_s, lam_o = flexible_flows(p_s, p_o, W_s, W_o, q_s, q_o, params)
    profit = p_s * b_s + p_o * b_o
    if lam_s > 0.0:
        profit -= params.w_s / params.mu_s * (1.0 / W_s + lam_s)
    if lam_o > 0.0:
        profit -= (1.0 / W_o + lam_o) ** 2 / (params.K * params.mu_o ** 2)
    return profit


def construct_dedicated_prices(p_s, p_o, W_s, W_o, q_s, q_o, params):
    """Dedicated prices (p_s', p_o') matching a flexible policy's flows when W_o > W_s.

    Implements the proof's three subcases; returns None when W_o <= W_s.
    """
    if not W_o > W_s:
        return None
    V = params.V
    d = W_o - W_s
    if p_o >= p_s:
        return (q_s * V * d + p_s * W_s) / (q_s * d + W_s), p_s
    We_s, We_o = effective_waits(W_s, W_o, q_s, q_o)
    b_s, b_o = demand_split(p_s, We_s, p_o, We_o, params)
    if b_s == 0.0:
        return ((1.0 - q_o) * V * d + p_o * W_s) / (W_o - q_o * d), p_o
    return (q_s * V * d + p_s * W_s) / (q_s * d + W_s), p_o


def _absent_price(params):
    return params.V * max(1.0, params.alpha) + 1.0


def _dedicated_starts(params, sol):
    """(p_s, p_o, W_s, W_o) starting points from the dedicated solutions."""
    starts = []
    candidates = [sol.chosen, sol.system_s, sol.system_o]
    if sol.hybrid is not None and sol.hybrid is not sol.chosen:
        candidates.append(sol.hybrid)
    for c in candidates:
        if isinstance(c, HybridSolution):
            s, o = c.standard, c.ondemand
            starts.append((s.price, o.price, s.lead_time, o.lead_time))
        elif c.system == "S":
            ch = c.channel
            if ch.arrival_rate > 0 and math.isfinite(ch.servers):
                starts.append((ch.price, _absent_price(params), ch.lead_time, 1e3))
        else:
            ch = c.channel
            starts.append((_absent_price(params), ch.price, 1e3, ch.lead_time))
    return starts


@dataclass
class FlexibleCheck:
    max_gap: float
    pi_star: float
    tolerance: float
    cells: list
    unconverged: list
    dedicated_value: float

    @property
    def passed(self):
        return self.max_gap <= self.tolerance


def _optimize_cell(q_s, q_o, params, starts):
    def f(x):
        return flexible_profit(x[0], x[1], math.exp(x[2]), math.exp(x[3]), q_s, q_o, params)

    best, best_x, ok_any = -INF, None, False
    for p_s, p_o, W_s, W_o in starts:
        x0 = np.array([p_s, p_o, math.log(W_s), math.log(W_o)])
        x, fx, ok = nelder_mead_max(f, x0, step=[0.05, 0.05, 0.2, 0.2])
        # restart once from the end point: simplex methods stall on kinks
        x, fx2, ok2 = nelder_mead_max(f, x, step=[0.01, 0.01, 0.05, 0.05])
        fx = max(fx, fx2)
        ok_any = ok_any or ok2
        if fx > best:
            best, best_x = fx, x
    return best, best_x, ok_any


def flexible_equivalence_check(params, grid_n=16, solution=None):
    """Optimise the flexible system on a grid of (q_s, q_o) and report max(pi_f - pi*)."""
    if grid_n < 8:
        raise DomainError("grid_n must be at least 8")
    sol = solution if solution is not None else solve_deployment(params)
    star = sol.pi_star
    starts = _dedicated_starts(params, sol)
    cells, bad = [], []
    gap = -INF
    qs = [i / grid_n for i in range(grid_n)]
    for q_s in qs:
        for q_o in qs:
            if q_s + q_o >= 1.0:
                continue
            val, _, ok = _optimize_cell(q_s, q_o, params, starts)
            cells.append((q_s, q_o, val))
            if not ok:
                bad.append((q_s, q_o))
            gap = max(gap, val - star)
    # q = (0, 0) is the dedicated model: the solver's policy must score pi* there
    dedicated = flexible_profit(*starts[0], 0.0, 0.0, params)
    return FlexibleCheck(gap, star, 1e-6 * max(1.0, abs(star)), cells, bad, dedicated)
