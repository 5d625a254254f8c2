"""Numerical deployment solver for the robustness variants.

Covers integer M/M/k staffing, Beta-distributed waiting sensitivity or
reservation rates, and a quality ratio alpha on the on-demand service.

Outer decisions are coverage quantiles. A single channel serves the
quantile u of most patient customers. The hybrid serves a total quantile u2
and gives the most patient share s of it to the slower channel. Prices
follow from the marginal types, and revenue then separates into per-channel
waiting weights a, so the inner problem in each channel is
    max_k  -a * W(k) - cost(k).
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInput, NoConvergence
from .hybrid import (DEGENERATE as EDGE_DEGENERATE, OL, SL, DeploymentSolution, HybridSolution,
                     RegimeMap)
from .model_core import (INF, UNIFORM, ChannelState, Heterogeneity, Regime, contractor_equilibrium,
                         lead_time_mmk_range)
from .numerics import cubic_root, cubic_root_array, golden_max, scan_maximize
from .single_service import DEGENERATE, FULL, PARTIAL, SHUTDOWN, SingleSolution
from .sweeps import parallel_map, regime_grid

MM1 = "MM1"
MMK = "MMk"
EDGE = 1e-9
N_OUTER = 32
N_INNER = 64
RTOL = 1e-10
# integer staffing makes the objectives piecewise smooth, so polishing past
# this width only resolves the jumps between staffing levels
RTOL_MMK = 1e-7


@dataclass(frozen=True)
class ExtensionConfig:
    queue_model: str = MM1
    theta_dist: Heterogeneity = UNIFORM
    r_dist: Heterogeneity = UNIFORM
    alpha: float = 1.0

    def __post_init__(self):
        if self.queue_model not in (MM1, MMK):
            raise InvalidInput(f"queue model must be MM1 or MMk, got {self.queue_model!r}")
        if not self.alpha > 0:
            raise InvalidInput("alpha must be positive")

    def apply(self, params):
        return params.with_(theta_dist=self.theta_dist, r_dist=self.r_dist, alpha=self.alpha)

    @classmethod
    def from_params(cls, params, queue_model=MM1):
        return cls(queue_model, params.theta_dist, params.r_dist, params.alpha)


# ---------------------------------------------------------------------------
# staffing inside one channel

@dataclass(frozen=True)
class Staffing:
    value: float       # -a*W - cost
    lead_time: float
    servers: float
    cost: float


_IDLE = Staffing(0.0, INF, 0.0, 0.0)
_INFEASIBLE = Staffing(-INF, INF, 0.0, 0.0)


def mmk_window(lam, mu):
    """Integer staffing candidates: stable counts up to a square-root safety margin."""
    base = lam / mu
    lo = int(math.floor(base)) + 1
    hi = int(math.ceil(base)) + int(math.ceil(10.0 * math.sqrt(base))) + 10
    return lo, hi


def _ondemand_cost(k, p):
    """SP outlay that makes k contractors join: k times the marginal reservation rate."""
    if p.r_dist.is_uniform:
        # base-model convention (no cap at the pool size)
        return k * k / p.K
    if k > p.K:
        return INF
    return k * p.r_dist.ppf(k / p.K)


def _ondemand_cost_vec(ks, p):
    ks = np.asarray(ks, dtype=float)
    if p.r_dist.is_uniform:
        return ks * ks / p.K
    return np.array([_ondemand_cost(k, p) for k in ks])


def _staff_mm1_standard(lam, a, p, W_lo=0.0, W_hi=INF):
    w, mu = p.w_s, p.mu_s
    W = math.sqrt(w / (mu * a))
    W = min(max(W, W_lo), W_hi)
    k = (1.0 / W + lam) / mu
    cost = w * k
    return Staffing(-a * W - cost, W, k, cost)


def _staff_mm1_ondemand(lam, a, p, W_lo=0.0, W_hi=INF):
    mu = p.mu_o

    def at(W):
        k = (1.0 / W + lam) / mu
        cost = _ondemand_cost(k, p)
        return Staffing(-a * W - cost, W, k, cost)

    if W_lo == W_hi:
        return at(W_lo)
    if p.r_dist.is_uniform:
        # concave in W: clip the cubic FOC root into the bounds
        L = cubic_root(2.0 * lam ** 3 / (a * p.K * mu * mu))
        return at(min(max(L / lam, W_lo), W_hi))
    if lam >= p.K * mu:
        return _INFEASIBLE
    # search over the marginal reservation rate h: k = K F(h) joiners at outlay k h,
    # so each trial costs one cdf call instead of a quantile inversion
    R, K = p.r_dist, p.K
    k_hi = min(K, (1.0 / max(W_lo, 1e-8) + lam) / mu)
    k_lo = max(lam / mu * (1.0 + 1e-12), (1.0 / min(W_hi, 1e6) + lam) / mu)
    if k_hi < k_lo:
        return _INFEASIBLE
    h_lo, h_hi = R.ppf(k_lo / K), R.ppf(k_hi / K)

    def at_h(h):
        k = min(max(K * R.cdf(h), k_lo), k_hi)
        W = 1.0 / (k * mu - lam)
        return Staffing(-a * W - k * h, W, k, k * h)

    def g(h):
        return at_h(h).value

    def g_vec(hs):
        return np.array([g(h) for h in hs])

    if not h_hi > h_lo:
        return at_h(h_hi)
    x, fx, _, _ = scan_maximize(g_vec, g, h_lo, h_hi, n_scan=48, n_starts=3, rtol=1e-12)
    if not math.isfinite(fx):
        return _INFEASIBLE
    return at_h(x)


def _staff_mmk(lam, a, mu, cost_vec, W_lo=0.0, W_hi=INF, k_cap=INF):
    lo, hi = mmk_window(lam, mu)
    ks = np.arange(lo, hi + 1)
    W = lead_time_mmk_range(lo, hi, mu, lam)
    vals = -a * W - cost_vec(ks)
    ok = (W >= W_lo) & (W <= W_hi) & (ks <= k_cap)
    if not ok.any():
        return _INFEASIBLE
    vals = np.where(ok, vals, -np.inf)
    i = int(np.argmax(vals))
    return Staffing(float(vals[i]), float(W[i]), float(ks[i]), float(cost_vec(ks[i:i + 1])[0]))


def staff_channel(channel, lam, a, p, cfg, W_lo=0.0, W_hi=INF):
    """Best staffing for one channel carrying flow lam with waiting weight a."""
    if lam <= 0.0:
        return _IDLE
    if a <= 0.0:
        # nobody cares about the wait: run at the cheapest stable staffing
        a = 1e-300
    if cfg.queue_model == MM1:
        if channel == "s":
            return _staff_mm1_standard(lam, a, p, W_lo, W_hi)
        return _staff_mm1_ondemand(lam, a, p, W_lo, W_hi)
    if channel == "s":
        return _staff_mmk(lam, a, p.mu_s, lambda ks: p.w_s * np.asarray(ks, dtype=float), W_lo, W_hi)
    cap = INF if p.r_dist.is_uniform else math.floor(p.K)
    return _staff_mmk(lam, a, p.mu_o, lambda ks: _ondemand_cost_vec(ks, p), W_lo, W_hi, cap)



# vectorised unconstrained staffing, used by the pre-scans

def mmk_sojourn_matrix(lams, mu, k_max):
    """M/M/k sojourn times W[i, k-1] for flows lams[i] and k = 1..k_max (inf if unstable).

    Erlang B comes from log-space partial sums of the Poisson terms, so the
    whole matrix is built without a per-flow recursion.
    """
    lams = np.asarray(lams, dtype=float)
    a = lams / mu
    i = np.arange(k_max + 1)
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, k_max + 1)))])
    with np.errstate(divide="ignore"):
        logterm = i[None, :] * np.log(a)[:, None] - logfact[None, :]
    logS = np.logaddexp.accumulate(logterm, axis=1)
    B = np.exp(logterm - logS)[:, 1:]
    ks = np.arange(1, k_max + 1)[None, :]
    rho = a[:, None] / ks
    stable = ks * mu > lams[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        C = B / (1.0 - rho * (1.0 - B))
        W = 1.0 / mu + C / (ks * mu - lams[:, None])
    return np.where(stable, W, np.inf)


def _staff_vec(channel, lams, weights, p, cfg):
    """(value, lead time) arrays of the unconstrained staffing problem."""
    lams = np.asarray(lams, dtype=float)
    weights = np.maximum(np.asarray(weights, dtype=float), 1e-300)
    val = np.zeros_like(lams)
    W = np.full_like(lams, np.inf)
    on = lams > 0.0
    if not on.any():
        return val, W
    lam, a = lams[on], weights[on]
    if cfg.queue_model == MM1:
        if channel == "s":
            mu, w = p.mu_s, p.w_s
            Wc = np.sqrt(w / (mu * a))
            v = -a * Wc - w * (1.0 / Wc + lam) / mu
        elif p.r_dist.is_uniform:
            mu = p.mu_o
            Wc = cubic_root_array(2.0 * lam ** 3 / (a * p.K * mu * mu)) / lam
            k = (1.0 / Wc + lam) / mu
            v = -a * Wc - k * k / p.K
        else:
            st = [staff_channel(channel, x, y, p, cfg) for x, y in zip(lam, a)]
            v = np.array([t.value for t in st])
            Wc = np.array([t.lead_time for t in st])
    else:
        mu = p.mu_s if channel == "s" else p.mu_o
        base = lam / mu
        lo = np.floor(base).astype(int) + 1
        hi = np.ceil(base).astype(int) + np.ceil(10.0 * np.sqrt(base)).astype(int) + 10
        k_max = int(hi.max())
        ks = np.arange(1, k_max + 1)
        Wm = mmk_sojourn_matrix(lam, mu, k_max)
        if channel == "s":
            cost = p.w_s * ks.astype(float)
        else:
            cost = _ondemand_cost_vec(ks, p)
            if not p.r_dist.is_uniform:
                cost = np.where(ks <= math.floor(p.K), cost, np.inf)
        vals = -a[:, None] * Wm - cost[None, :]
        window = (ks[None, :] >= lo[:, None]) & (ks[None, :] <= hi[:, None])
        vals = np.where(window & np.isfinite(vals), vals, -np.inf)
        j = np.argmax(vals, axis=1)
        rows = np.arange(lam.size)
        v = vals[rows, j]
        Wc = np.where(np.isfinite(v), Wm[rows, j], np.inf)
    val[on] = v
    W[on] = Wc
    return val, W


# ---------------------------------------------------------------------------
# single channel

def _scan_grid(n):
    lin = np.linspace(EDGE, 1.0, n)
    edge = np.geomspace(EDGE, 0.05, 12)
    return np.unique(np.concatenate([lin, edge, 1.0 - edge]))


def _ppf_vec(dist, us):
    us = np.asarray(us, dtype=float)
    if dist.is_uniform:
        return np.clip(us, 0.0, 1.0)
    return np.array([dist.ppf(u) for u in us])


def _rtol(cfg):
    return RTOL_MMK if cfg.queue_model == MMK else RTOL


def _value(channel, p):
    return p.V if channel == "s" else p.alpha * p.V


def _single_eval(u, channel, p, cfg):
    t = p.theta_dist.ppf(u)
    lam = p.Lambda * u
    st = staff_channel(channel, lam, lam * t, p, cfg)
    return lam * _value(channel, p) + st.value, t, lam, st


def _solve_single(channel, p, cfg):
    system = "S" if channel == "s" else "O"
    regime = Regime.S if channel == "s" else Regime.O
    if channel == "s" and p.w_s == 0.0:
        ch = ChannelState(p.V, 0.0, INF, p.Lambda, 0.0)
        return SingleSolution(ch, p.V * p.Lambda, regime, DEGENERATE, system)

    def f(u):
        return _single_eval(u, channel, p, cfg)[0]

    def f_vec(us):
        us = np.asarray(us, dtype=float)
        lam = p.Lambda * us
        t = _ppf_vec(p.theta_dist, us)
        v, _ = _staff_vec(channel, lam, lam * t, p, cfg)
        return lam * _value(channel, p) + v

    u, fx, _, _ = scan_maximize(f_vec, f, EDGE, 1.0, n_starts=4, rtol=_rtol(cfg), grid=_scan_grid(N_INNER))
    if not math.isfinite(fx) or fx <= 0.0:
        ch = ChannelState(_value(channel, p), p.w_s if channel == "s" else 0.0, 0.0, 0.0, INF)
        return SingleSolution(ch, 0.0, Regime.SHUTDOWN, SHUTDOWN, system)
    _, t, lam, st = _single_eval(u, channel, p, cfg)
    price = _value(channel, p) - t * st.lead_time
    wage = p.w_s if channel == "s" else st.cost / lam
    ch = ChannelState(price, wage, st.servers, lam, st.lead_time)
    branch = FULL if u >= 1.0 - 1e-12 else PARTIAL
    return SingleSolution(ch, fx, regime, branch, system)


# ---------------------------------------------------------------------------
# hybrid

@dataclass(frozen=True)
class _HybridEval:
    profit: float
    lam_f: float
    lam_sl: float
    t1: float
    t2: float
    fast: Staffing
    slow: Staffing
    ordered: bool


def _joint_root(lam_o, A, p):
    """Common lead time maximising -A W - w k_s - k_o^2 / K (uniform r).

    The FOC is A W^3 - B W - C = 0 with B, C > 0; the cubic is convex on
    W > 0 and negative at 0, so Newton from an upper bound descends onto
    the unique positive root.
    """
    c = 1.0 / (p.K * p.mu_o * p.mu_o)
    B = p.w_s / p.mu_s + 2.0 * lam_o * c
    C = 2.0 * c
    W = max(math.sqrt(2.0 * B / A), (2.0 * C / A) ** (1.0 / 3.0))
    for _ in range(100):
        f = A * W ** 3 - B * W - C
        W_new = W - f / (3.0 * A * W * W - B)
        if abs(W_new - W) <= 1e-15 * W:
            return W_new
        W = W_new
    return W


def _joint_mm1(fast_ch, slow_ch, lam_f, lam_sl, a_f, a_sl, p, cfg, W_a, W_b):
    """Both channels at one common lead time, searched between the two free optima."""
    lo, hi = sorted((W_a, W_b))
    if p.r_dist.is_uniform:
        W = min(max(_joint_root(lam_o=lam_sl if slow_ch == "o" else lam_f, A=a_f + a_sl, p=p),
                    lo), hi)
        return (staff_channel(fast_ch, lam_f, a_f, p, cfg, W, W),
                staff_channel(slow_ch, lam_sl, a_sl, p, cfg, W, W))

    def g(x):
        W = math.exp(x)
        f = staff_channel(fast_ch, lam_f, a_f, p, cfg, W, W)
        s = staff_channel(slow_ch, lam_sl, a_sl, p, cfg, W, W)
        return f.value + s.value

    x, _ = golden_max(g, math.log(lo), math.log(hi), rtol=1e-11)
    W = math.exp(x)
    return (staff_channel(fast_ch, lam_f, a_f, p, cfg, W, W),
            staff_channel(slow_ch, lam_sl, a_sl, p, cfg, W, W))


def _hybrid_eval(u2, s, branch, p, cfg):
    fast_ch, slow_ch = ("s", "o") if branch == OL else ("o", "s")
    F = p.theta_dist
    t2 = F.ppf(u2)
    t1 = F.ppf(s * u2)
    lam_t = p.Lambda * u2
    lam_sl = lam_t * s
    lam_f = lam_t - lam_sl
    a_f = lam_f * t2 + lam_sl * (t2 - t1)
    a_sl = lam_sl * t1
    fast = staff_channel(fast_ch, lam_f, a_f, p, cfg)
    slow = staff_channel(slow_ch, lam_sl, a_sl, p, cfg)
    ordered = True
    if slow.lead_time < fast.lead_time:
        ordered = False
        if cfg.queue_model == MM1:
            fast, slow = _joint_mm1(fast_ch, slow_ch, lam_f, lam_sl, a_f, a_sl, p, cfg,
                                    fast.lead_time, slow.lead_time)
        else:
            # integer staffing: hold one channel and restrict the other, keep the better
            s_restr = staff_channel(slow_ch, lam_sl, a_sl, p, cfg, W_lo=fast.lead_time)
            f_restr = staff_channel(fast_ch, lam_f, a_f, p, cfg, W_hi=slow.lead_time)
            if fast.value + s_restr.value >= f_restr.value + slow.value:
                slow = s_restr
            else:
                fast = f_restr
    profit = lam_sl * _value(slow_ch, p) + lam_f * _value(fast_ch, p) + fast.value + slow.value
    return _HybridEval(profit, lam_f, lam_sl, t1, t2, fast, slow, ordered)


def _hybrid_profit_vec(u2, ss, branch, p, cfg):
    """Vectorised _hybrid_eval(...).profit; ordering violations go through the scalar path."""
    fast_ch, slow_ch = ("s", "o") if branch == OL else ("o", "s")
    ss = np.asarray(ss, dtype=float)
    t2 = p.theta_dist.ppf(u2)
    t1 = _ppf_vec(p.theta_dist, ss * u2)
    lam_t = p.Lambda * u2
    lam_sl = lam_t * ss
    lam_f = lam_t - lam_sl
    v_f, W_f = _staff_vec(fast_ch, lam_f, lam_f * t2 + lam_sl * (t2 - t1), p, cfg)
    v_sl, W_sl = _staff_vec(slow_ch, lam_sl, lam_sl * t1, p, cfg)
    prof = lam_sl * _value(slow_ch, p) + lam_f * _value(fast_ch, p) + v_f + v_sl
    for i in np.nonzero(W_sl < W_f)[0]:
        prof[i] = _hybrid_eval(u2, float(ss[i]), branch, p, cfg).profit
    return prof


def _best_share(u2, branch, p, cfg):
    def f(s):
        return _hybrid_eval(u2, s, branch, p, cfg).profit

    def f_vec(ss):
        return _hybrid_profit_vec(u2, ss, branch, p, cfg)

    s, fx, _, _ = scan_maximize(f_vec, f, EDGE, 1.0 - EDGE, n_starts=3, rtol=_rtol(cfg),
                                grid=_scan_grid(N_INNER)[:-1])
    return s, fx


def _solve_hybrid_branch(branch, p, cfg):
    def g(u2):
        return _best_share(u2, branch, p, cfg)[1]

    def g_vec(us):
        return np.array([g(u) for u in us])

    grid = np.unique(np.concatenate([np.linspace(0.05, 1.0, N_OUTER), [EDGE, 0.01]]))
    u2, fx, _, _ = scan_maximize(g_vec, g, EDGE, 1.0, n_starts=2, rtol=_rtol(cfg), grid=grid)
    if not math.isfinite(fx):
        return None
    s, _ = _best_share(u2, branch, p, cfg)
    degenerate = s <= EDGE_DEGENERATE or s >= 1.0 - EDGE_DEGENERATE
    return u2, s, _hybrid_eval(u2, s, branch, p, cfg), degenerate


def _assemble_hybrid(branch, ev, p):
    fast_ch = "s" if branch == OL else "o"
    slow_ch = "o" if branch == OL else "s"
    p_f = _value(fast_ch, p) - ev.t2 * ev.fast.lead_time
    p_sl = _value(slow_ch, p) - _value(fast_ch, p) + p_f - ev.t1 * (ev.slow.lead_time - ev.fast.lead_time)
    fast = ChannelState(p_f, 0.0, ev.fast.servers, ev.lam_f, ev.fast.lead_time)
    slow = ChannelState(p_sl, 0.0, ev.slow.servers, ev.lam_sl, ev.slow.lead_time)
    std, od = (fast, slow) if branch == OL else (slow, fast)
    od_cost = ev.slow.cost if branch == OL else ev.fast.cost
    std = ChannelState(std.price, p.w_s, std.servers, std.arrival_rate, std.lead_time)
    od = ChannelState(od.price, od_cost / od.arrival_rate, od.servers, od.arrival_rate, od.lead_time)
    return HybridSolution(std, od, ev.profit, branch, od.arrival_rate, ev.ordered)


def _check_participation(od, p):
    if p.r_dist.is_uniform or od.arrival_rate <= 0.0:
        return
    k = contractor_equilibrium(od.arrival_rate, od.wage, p)
    if abs(k - od.servers) > 1e-6 * max(1.0, od.servers):
        raise NoConvergence(f"contractor fixed point gives {k} joiners, policy needs {od.servers} "
                            f"(lambda_o={od.arrival_rate}, w_o={od.wage})")


def solve_hybrid_general(params, cfg):
    p = cfg.apply(params)
    if p.w_s == 0.0:
        return None
    best = None
    for branch in (OL, SL):
        res = _solve_hybrid_branch(branch, p, cfg)
        if res is None:
            continue
        if best is None or res[2].profit > best[1].profit:
            best = (branch, res[2], res[3])
    if best is None or best[2]:
        return None
    sol = _assemble_hybrid(best[0], best[1], p)
    _check_participation(sol.ondemand, p)
    return sol


def solve_deployment_general(params, cfg=None):
    cfg = cfg if cfg is not None else ExtensionConfig.from_params(params)
    p = cfg.apply(params)
    s = _solve_single("s", p, cfg)
    o = _solve_single("o", p, cfg)
    if o.channel.arrival_rate > 0:
        _check_participation(o.channel, p)
    h = solve_hybrid_general(params, cfg)
    pi_h = h.profit if h is not None else -INF
    if h is not None and pi_h >= o.profit and pi_h >= s.profit:
        chosen, regime = h, h.regime
    elif o.profit >= s.profit:
        chosen, regime = o, o.regime
    else:
        chosen, regime = s, s.regime
    return DeploymentSolution(regime, chosen, s.profit, o.profit, pi_h, s, o, h)


# ---------------------------------------------------------------------------
# regime maps

def _general_cell(args):
    params, cfg = args
    sol = solve_deployment_general(params, cfg)
    return sol.regime, sol.pi_s, sol.pi_o, sol.pi_h, sol.pi_star


def regime_map_general(params, cfg, sweep=None, jobs=1, check=None):
    """Regime grid under an extension. check defaults to True for MMk."""
    sweep = sweep if sweep is not None else regime_grid(48, 48)
    if [a.field for a in sweep.axes] != ["K", "w_s"]:
        raise DomainError("regime maps sweep (K, w_s) with K as the outer axis")
    if check is None:
        check = cfg.queue_model == MMK
    pts = sweep.points()
    out = parallel_map(_general_cell, [(sweep.apply(params, pt), cfg) for pt in pts], jobs)
    nK, nw = sweep.shape
    rows = [[out[i * nw + j][0] for j in range(nw)] for i in range(nK)]
    stats = np.array([r[1:] for r in out], dtype=float).T.reshape(4, nK, nw)
    rmap = RegimeMap(sweep.axes[1].values, sweep.axes[0].values, rows,
                     stats[0], stats[1], stats[2], stats[3])
    if check:
        rmap.check_pattern()
    return rmap
