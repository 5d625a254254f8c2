"""Consumer surplus, labor welfare and social welfare for each deployment."""
import math
from dataclasses import dataclass

from .errors import DomainError
from .model_core import INF, choice_segments, demand_split
from .numerics import adaptive_simpson
from .single_service import c_bar_s, k_bar, l_bar_o, solve_system_o, solve_system_s

QUAD_TOL = 1e-8


@dataclass(frozen=True)
class WelfareReport:
    profit: float
    cs: float
    lw: float
    sw: float
    identity_residual: float
    shutdown: bool = False

    @classmethod
    def build(cls, profit, cs, lw, sw, shutdown=False):
        return cls(profit, cs, lw, sw, abs(sw - (profit + lw + cs)), shutdown)

    def get(self, metric):
        return {"profit": self.profit, "cs": self.cs, "lw": self.lw, "sw": self.sw}[metric]


def welfare_system_s(params):
    V, lam, w, mu = params.V, params.Lambda, params.w_s, params.mu_s
    if V < c_bar_s(params):
        return WelfareReport.build(0.0, 0.0, 0.0, 0.0, shutdown=True)
    r = math.sqrt(w * lam / mu)
    lw = (1.0 - 0.5 * w) * (r + w * lam / mu)
    cs = 0.5 * r
    sw = V * lam - w * w * lam / (2.0 * mu) - 0.5 * (1.0 + w) * r
    return WelfareReport.build(solve_system_s(params).profit, cs, lw, sw)


def welfare_system_o(params):
    V, lam, K, mu = params.V, params.Lambda, params.K, params.mu_o
    s = math.sqrt(V * lam + 1.0)
    profit = solve_system_o(params).profit
    if K <= k_bar(params):
        q = K * mu * mu * (s - 1.0) ** 4 / lam ** 2
        lw = q / 8.0
        cs = q / (4.0 * s)
        sw = q * (3.0 * s + 2.0) / (8.0 * s)
    else:
        L = l_bar_o(params)
        lw = 0.25 * L * (1.0 + L)
        cs = 0.5 * L
        sw = V * lam - 0.25 * L * (3.0 + L)
    return WelfareReport.build(profit, cs, lw, sw)


def lw_peak_o(params):
    s = math.sqrt(params.V * params.Lambda + 1.0)
    return s * (s - 1.0) / 4.0


def cs_peak_o(params):
    return (math.sqrt(params.V * params.Lambda + 1.0) - 1.0) / 2.0


def _integrand_max_utility(std, od, params):
    V, a = params.V, params.alpha

    def f(t):
        u = 0.0
        if std is not None:
            u = max(u, V - std.price - t * std.lead_time)
        if od is not None:
            u = max(u, a * V - od.price - t * od.lead_time)
        return u

    return f


def cs_numeric(std, od, params):
    """Lambda * int max(U_s, U_o, 0) dtheta for uniform theta, split at the kinks."""
    f = _integrand_max_utility(std, od, params)
    p_s = std.price if std is not None else INF
    W_s = std.lead_time if std is not None else 1.0
    p_o = od.price if od is not None else INF
    W_o = od.lead_time if od is not None else 1.0
    total = 0.0
    for lo, hi, _ in choice_segments(p_s, W_s, p_o, W_o, params):
        total += adaptive_simpson(f, lo, hi, tol=QUAD_TOL)
    return params.Lambda * total


def welfare_hybrid(solution, params, check=True):
    """Welfare of a hybrid policy; CS from the ordered-segment closed forms."""
    std, od = solution.standard, solution.ondemand
    V, lam, w = params.V, params.Lambda, params.w_s
    p_s, W_s, p_o, W_o = std.price, std.lead_time, od.price, od.lead_time
    if abs(W_o - W_s) < 1e-12:
        cs = cs_numeric(std, od, params)
    elif W_o > W_s:
        # patient customers take the cheaper, slower on-demand service
        cs = lam * (V - p_s - 0.5 * W_s + (p_s - p_o) ** 2 / (2.0 * (W_o - W_s)))
    else:
        t1 = (p_o - p_s) / (W_s - W_o)
        t2 = min(1.0, (V - p_o) / W_o)
        cs = lam * ((V - p_s) * t1 - 0.5 * W_s * t1 * t1
                    + (V - p_o) * (t2 - t1) - 0.5 * W_o * (t2 * t2 - t1 * t1))
    lw = std.servers * w * (1.0 - 0.5 * w) + od.servers ** 2 / (2.0 * params.K)
    # social welfare counted directly: value served minus waiting and reservation costs
    waiting = _waiting_cost_uniform(std, od, params)
    sw = V * (std.arrival_rate + od.arrival_rate) - waiting \
        - std.servers * w * w / 2.0 - od.servers ** 2 / (2.0 * params.K)
    rep = WelfareReport.build(solution.profit, cs, lw, sw)
    if check:
        num = cs_numeric(std, od, params)
        if abs(num - cs) > 1e-6 * max(1.0, abs(cs)):
            raise DomainError(f"hybrid CS closed form {cs} disagrees with quadrature {num}")
    return rep


def _waiting_cost_uniform(std, od, params):
    """Lambda * int theta * W_chosen dtheta for uniform theta."""
    total = 0.0
    p_s = std.price if std is not None else INF
    p_o = od.price if od is not None else INF
    W_s = std.lead_time if std is not None else 1.0
    W_o = od.lead_time if od is not None else 1.0
    for lo, hi, ch in choice_segments(p_s, W_s, p_o, W_o, params):
        if ch is None:
            continue
        W = W_s if ch == "s" else W_o
        total += 0.5 * (hi * hi - lo * lo) * W
    return params.Lambda * total


def welfare_generic(standard, ondemand, params):
    """Welfare of an arbitrary two-channel policy under general distributions.

    standard / ondemand are ChannelState-like objects (None for an absent channel).
    The arrival rates are re-derived from prices and lead times. Each choice
    segment has a utility linear in theta, so its integral is exact given the
    cdf and the truncated first moment of the distribution.
    """
    V, a, lam = params.V, params.alpha, params.Lambda
    F = params.theta_dist
    p_s = standard.price if standard is not None else INF
    W_s = standard.lead_time if standard is not None else 1.0
    p_o = ondemand.price if ondemand is not None else INF
    W_o = ondemand.lead_time if ondemand is not None else 1.0
    cs = value = waiting = 0.0
    for lo, hi, ch in choice_segments(p_s, W_s, p_o, W_o, params):
        if ch is None:
            continue
        mass = F.cdf(hi) - F.cdf(lo)
        m1 = F.partial_mean(hi) - F.partial_mean(lo)
        if ch == "s":
            v, p, W = V, p_s, W_s
        else:
            v, p, W = a * V, p_o, W_o
        cs += (v - p) * mass - W * m1
        value += v * mass
        waiting += W * m1
    cs *= lam
    value *= lam
    waiting *= lam
    lam_s, lam_o = demand_split(p_s, W_s, p_o, W_o, params)
    if (standard is not None and ondemand is not None and a == 1.0
            and p_s == p_o and W_s == W_o):
        # identical offers: the choice rule cannot split demand, keep the policy's split
        tot = standard.arrival_rate + ondemand.arrival_rate
        if tot > 0:
            served = lam_s + lam_o
            lam_s = served * standard.arrival_rate / tot
            lam_o = served - lam_s
    R = params.r_dist
    profit = 0.0
    lw = 0.0
    reservation = 0.0
    if standard is not None:
        k_s, w = standard.servers, params.w_s
        profit += p_s * lam_s - w * k_s
        r_cost = k_s * R.partial_mean(w)
        lw += k_s * w - r_cost
        reservation += r_cost
    if ondemand is not None and ondemand.servers > 0:
        k_o, w_o = ondemand.servers, ondemand.wage
        profit += (p_o - w_o) * lam_o
        h = lam_o * w_o / k_o
        r_cost = params.K * R.partial_mean(h)
        lw += params.K * R.cdf(h) * h - r_cost
        reservation += r_cost
    elif ondemand is not None:
        profit += (p_o - ondemand.wage) * lam_o
    sw = value - waiting - reservation
    return WelfareReport.build(profit, cs, lw, sw)


def welfare_of(solution, params):
    """Welfare report for any solver output (single, hybrid or deployment)."""
    from .hybrid import DeploymentSolution, HybridSolution

    if isinstance(solution, DeploymentSolution):
        solution = solution.chosen
    if isinstance(solution, HybridSolution):
        return welfare_hybrid(solution, params)
    if solution.system == "S":
        return welfare_system_s(params)
    return welfare_system_o(params)
