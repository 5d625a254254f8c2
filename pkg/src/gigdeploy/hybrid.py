"""Hybrid two-service deployment by reduction to 1-D searches over lambda_o.

Given lambda_o, the standard lead time has a closed form in each branch
(on-demand longer, "ol", or standard longer, "sl") and the on-demand lead
time is the root of a cubic FOC clipped to the branch's feasible set.
"""
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PatternViolation, TheoremViolation
from .model_core import INF, ChannelState, Regime
from .numerics import cubic_root, cubic_root_array, scan_maximize
from .single_service import k_bar, l_bar_o, solve_system_o, solve_system_s
from .sweeps import parallel_map, regime_grid

OL = "OL"
SL = "SL"
N_SCAN = 1024
N_STARTS = 8
EDGE = 1e-9       # search interval is [EDGE, 1 - EDGE] * Lambda
DEGENERATE = 1e-7  # optimum this close to 0 or Lambda counts as a single service


def _require_base(params):
    if not params.is_base:
        raise DomainError("closed-form hybrid solver covers uniform heterogeneity with alpha = 1; "
                          "use extensions.solve_deployment_general")


def pi_one(params):
    """System S objective at full coverage with the optimal lead time."""
    V, lam, w, mu = params.V, params.Lambda, params.w_s, params.mu_s
    return V * lam - w * lam / mu - 2.0 * math.sqrt(w * lam / mu)


def ws_given_ol(lam_o, params):
    lam = params.Lambda
    if not 0 <= lam_o < lam:
        raise DomainError("ws_given_ol needs 0 <= lambda_o < Lambda")
    return math.sqrt(lam * params.w_s / (params.mu_s * (lam + lam_o) * (lam - lam_o)))


def ws_given_sl(lam_o, params):
    lam = params.Lambda
    if not 0 <= lam_o < lam:
        raise DomainError("ws_given_sl needs 0 <= lambda_o < Lambda")
    return math.sqrt(lam * params.w_s / params.mu_s) / (lam - lam_o)


def wo_interior_ol(lam_o, params):
    if not lam_o > 0:
        raise DomainError("interior FOC is degenerate at lambda_o = 0")
    x = 2.0 * params.Lambda * lam_o / (params.K * params.mu_o ** 2)
    return cubic_root(x) / lam_o


def wo_interior_sl(lam_o, params):
    lam = params.Lambda
    if not 0 < lam_o <= lam:
        raise DomainError("interior FOC needs 0 < lambda_o <= Lambda")
    x = 2.0 * lam * lam_o ** 2 / (params.K * params.mu_o ** 2 * (2.0 * lam - lam_o))
    return cubic_root(x) / lam_o


def region_boundary(lam_o, params):
    """W_o frontier between the ol region (above) and the sl region (below)."""
    lam, w, mu = params.Lambda, params.w_s, params.mu_s
    if not 0 <= lam_o < lam:
        raise DomainError("region_boundary needs 0 <= lambda_o < Lambda")
    if lam_o == 0:
        p1 = pi_one(params)
        if p1 > 0:
            return math.sqrt(w / (lam * mu))
        return 0.0 if p1 == 0 else -INF
    first = (math.sqrt(lam * w * (lam + lam_o) / (mu * (lam - lam_o)))
             - math.sqrt(lam * w / mu)) / lam_o
    return min(first, pi_one(params) / (2.0 * lam_o))


def ol_lambda_bound(params):
    """Largest lambda_o for which the ol branch keeps the whole market; None if empty."""
    V, lam, w, mu = params.V, params.Lambda, params.w_s, params.mu_s
    if V * mu <= w:
        return None
    rad = lam * lam - 4.0 * lam * w * mu / (V * mu - w) ** 2
    if rad < 0:
        return None
    return math.sqrt(rad)


def pi_two(lam_o, W_o, params):
    lam, K, mu = params.Lambda, params.K, params.mu_o
    return lam_o * (params.V - lam_o * W_o / lam) - (1.0 / W_o + lam_o) ** 2 / (K * mu * mu)


def profit_ol(lam_o, W_o, params):
    bound = ol_lambda_bound(params)
    if params.V * params.mu_s <= params.w_s:
        raise DomainError("ol branch undefined when V*mu_s <= w_s")
    if bound is None or lam_o > bound:
        return -INF
    lam, w, mu = params.Lambda, params.w_s, params.mu_s
    return (pi_two(lam_o, W_o, params) + (lam - lam_o) * (params.V - w / mu)
            - 2.0 * math.sqrt(w * (lam + lam_o) * (lam - lam_o) / (lam * mu)))


def profit_sl(lam_o, W_o, params):
    lam, w, mu = params.Lambda, params.w_s, params.mu_s
    return pi_two(lam_o, W_o, params) + (lam - lam_o) * (
        params.V - w / mu - 2.0 * math.sqrt(w / (lam * mu)) - 2.0 * lam_o * W_o / lam)


# ---------------------------------------------------------------------------
# vectorised branch profiles: best W_o for each lambda_o

def _pi_two_vec(l, W, p):
    return l * (p.V - l * W / p.Lambda) - (1.0 / W + l) ** 2 / (p.K * p.mu_o ** 2)


def _boundary_vec(l, p):
    lam, w, mu = p.Lambda, p.w_s, p.mu_s
    first = (np.sqrt(lam * w * (lam + l) / (mu * (lam - l))) - math.sqrt(lam * w / mu)) / l
    return np.minimum(first, pi_one(p) / (2.0 * l))


def ol_profile(l, p, regions="feasible"):
    """(profit, W_o, interior) along lambda_o for the ol branch."""
    l = np.atleast_1d(np.asarray(l, dtype=float))
    lam, w, mu = p.Lambda, p.w_s, p.mu_s
    bound = ol_lambda_bound(p)
    if bound is None:
        nan = np.full_like(l, np.nan)
        return np.full_like(l, -np.inf), nan, np.zeros(l.shape, bool)
    ws = np.sqrt(lam * w / (mu * (lam + l) * (lam - l)))
    lower = ws if regions == "feasible" else np.maximum(ws, _boundary_vec(l, p))
    W_hat = cubic_root_array(2.0 * lam * l / (p.K * p.mu_o ** 2)) / l
    W = np.maximum(W_hat, lower)
    val = (_pi_two_vec(l, W, p) + (lam - l) * (p.V - w / mu)
           - 2.0 * np.sqrt(w * (lam + l) * (lam - l) / (lam * mu)))
    val = np.where(l <= bound, val, -np.inf)
    return val, W, W_hat >= lower


def sl_profile(l, p, regions="feasible"):
    """(profit, W_o, interior) along lambda_o for the sl branch."""
    l = np.atleast_1d(np.asarray(l, dtype=float))
    lam, w, mu = p.Lambda, p.w_s, p.mu_s
    if regions == "feasible":
        ws = math.sqrt(lam * w / mu) / (lam - l)
        upper = np.minimum(np.minimum(ws, pi_one(p) / (2.0 * l)), 0.5 * (p.V - w / mu))
    else:
        upper = _boundary_vec(l, p)
    W_chk = cubic_root_array(2.0 * lam * l * l / (p.K * p.mu_o ** 2 * (2.0 * lam - l))) / l
    ok = upper > 0
    W = np.where(ok, np.minimum(W_chk, np.where(ok, upper, 1.0)), np.nan)
    with np.errstate(invalid="ignore"):
        val = _pi_two_vec(l, W, p) + (lam - l) * (
            p.V - w / mu - 2.0 * math.sqrt(w / (lam * mu)) - 2.0 * l * W / lam)
    val = np.where(ok, val, -np.inf)
    return val, W, W_chk <= upper


# ---------------------------------------------------------------------------
# solutions

@dataclass(frozen=True)
class HybridSolution:
    standard: ChannelState
    ondemand: ChannelState
    profit: float
    branch: str
    lambda_o_star: float
    interior: bool

    @property
    def regime(self):
        return Regime.H1 if self.ondemand.lead_time > self.standard.lead_time else Regime.H2


@dataclass(frozen=True)
class DeploymentSolution:
    regime: Regime
    chosen: object
    pi_s: float
    pi_o: float
    pi_h: float
    system_s: object = field(repr=False)
    system_o: object = field(repr=False)
    hybrid: object = field(repr=False)

    @property
    def profit(self):
        return self.chosen.profit

    @property
    def pi_star(self):
        return self.chosen.profit

    def channels(self):
        """(standard, ondemand) states, None for an unused channel."""
        c = self.chosen
        if isinstance(c, HybridSolution):
            return c.standard, c.ondemand
        if c.system == "S":
            return (c.channel if c.channel.arrival_rate > 0 else None), None
        return None, c.channel


def hybrid_from_branch(lam_o, W_o, branch, params, interior=True):
    """Assemble channel states and profit from (lambda_o, W_o) in a branch."""
    lam = params.Lambda
    lam_s = lam - lam_o
    if branch == OL:
        W_s = ws_given_ol(lam_o, params)
        p_s = params.V - W_s
        p_o = params.V - (lam_o * W_o + lam_s * W_s) / lam
        profit = profit_ol(lam_o, W_o, params)
    else:
        W_s = ws_given_sl(lam_o, params)
        p_o = params.V - W_o
        p_s = params.V - (lam_s * W_s + lam_o * W_o) / lam
        profit = profit_sl(lam_o, W_o, params)
    k_s = (1.0 / W_s + lam_s) / params.mu_s
    k_o = (1.0 / W_o + lam_o) / params.mu_o
    std = ChannelState(p_s, params.w_s, k_s, lam_s, W_s)
    od = ChannelState(p_o, k_o ** 2 / (params.K * lam_o), k_o, lam_o, W_o)
    return HybridSolution(std, od, profit, branch, lam_o, bool(interior))


def _solve_branch(profile, params, regions):
    lam = params.Lambda
    lo, hi = EDGE * lam, (1.0 - EDGE) * lam

    def f_vec(x):
        return profile(x, params, regions)[0]

    def f(x):
        return float(profile(x, params, regions)[0][0])

    x, fx, _, _ = scan_maximize(f_vec, f, lo, hi, n_scan=N_SCAN, n_starts=N_STARTS, rtol=1e-10)
    if not np.isfinite(fx):
        return None
    edge = DEGENERATE * lam
    degenerate = x <= edge or x >= lam - edge
    _, W, interior = profile(x, params, regions)
    return float(x), float(W[0]), bool(interior[0]), float(fx), degenerate


def solve_hybrid(params, regions="feasible"):
    """Best interior hybrid policy, or None when both branches collapse to a single service.

    regions="feasible" searches each branch over its own feasible set;
    regions="partition" uses the R1/R2 split along region_boundary.
    """
    _require_base(params)
    if params.w_s == 0.0:
        return None
    best = None
    for branch, profile in ((OL, ol_profile), (SL, sl_profile)):
        res = _solve_branch(profile, params, regions)
        if res is None:
            continue
        if best is None or res[3] > best[0][3]:
            best = (res, branch)
    # a branch whose optimum collapses onto one channel still competes; if it wins,
    # the other branch must not be reported as the hybrid value
    if best is None or best[0][4]:
        return None
    (x, W, interior, _, _), branch = best
    return hybrid_from_branch(x, W, branch, params, interior)


def solve_deployment(params, regions="feasible"):
    _require_base(params)
    s = solve_system_s(params)
    o = solve_system_o(params)
    h = solve_hybrid(params, regions)
    pi_h = h.profit if h is not None else -INF
    # ties: H > O > S
    if h is not None and pi_h >= o.profit and pi_h >= s.profit:
        chosen, regime = h, h.regime
    elif o.profit >= s.profit:
        chosen, regime = o, Regime.O
    else:
        chosen, regime = s, s.regime
    return DeploymentSolution(regime, chosen, s.profit, o.profit, pi_h, s, o, h)


# ---------------------------------------------------------------------------
# regime maps

@dataclass
class RegimeMap:
    ws: np.ndarray
    K: np.ndarray
    labels: list          # labels[i][j]: K[i], ws[j]
    pi_s: np.ndarray
    pi_o: np.ndarray
    pi_h: np.ndarray
    pi_star: np.ndarray
    solutions: list = field(default=None, repr=False)

    def bands(self):
        return [[lab.band for lab in row] for row in self.labels]

    def counts(self):
        out = {}
        for row in self.labels:
            for lab in row:
                out[lab.band] = out.get(lab.band, 0) + 1
        return out

    def s_threshold(self):
        """Per w_s column, the largest K still in regime S (nan when none)."""
        bands = self.bands()
        out = np.full(self.ws.size, np.nan)
        for j in range(self.ws.size):
            col = [bands[i][j] for i in range(self.K.size)]
            ks = [self.K[i] for i, b in enumerate(col) if b == "S"]
            if ks:
                out[j] = max(ks)
        return out

    def pattern_violations(self):
        bad = []
        for i, row in enumerate(self.bands()):
            if not re.fullmatch(r"S*H*O*", "".join(b if b in "SHO" else "X" for b in row)):
                bad.append(("row", i))
        bands = self.bands()
        for j in range(self.ws.size):
            col = "".join(bands[i][j] for i in range(self.K.size))
            if "S" in col and not re.fullmatch(r"S+[^S]*", col):
                bad.append(("column", j))
        thr = self.s_threshold()
        lowest = self.K[0] - 1.0
        t = np.where(np.isnan(thr), lowest, thr)
        for j in range(1, t.size):
            if t[j] > t[j - 1]:
                bad.append(("threshold", j))
        return bad

    def check_pattern(self):
        bad = self.pattern_violations()
        if bad:
            raise PatternViolation(f"regime map breaks the S*H*O* structure at {bad[:10]}", bad)
        return True


def _solve_cell(args):
    params, keep = args
    sol = solve_deployment(params)
    return sol if keep else (sol.regime, sol.pi_s, sol.pi_o, sol.pi_h, sol.pi_star)


def classify_regime_map(params, sweep=None, jobs=1, check=True, keep_solutions=False):
    sweep = sweep if sweep is not None else regime_grid()
    names = [a.field for a in sweep.axes]
    if names != ["K", "w_s"]:
        raise DomainError("regime maps sweep (K, w_s) with K as the outer axis")
    pts = sweep.points()
    out = parallel_map(_solve_cell, [(sweep.apply(params, pt), keep_solutions) for pt in pts], jobs)
    nK, nw = sweep.shape
    rows = []
    stats = np.empty((4, nK, nw))
    sols = [] if keep_solutions else None
    for idx, res in enumerate(out):
        i, j = divmod(idx, nw)
        if keep_solutions:
            sols.append(res)
            res = (res.regime, res.pi_s, res.pi_o, res.pi_h, res.pi_star)
        if j == 0:
            rows.append([])
        rows[-1].append(res[0])
        stats[:, i, j] = res[1:]
    rmap = RegimeMap(sweep.axes[1].values, sweep.axes[0].values, rows,
                     stats[0], stats[1], stats[2], stats[3], sols)
    if check:
        rmap.check_pattern()
    return rmap


# ---------------------------------------------------------------------------
# proliferation effects

@dataclass(frozen=True)
class StandardEffect:
    dp_s: float
    dW_s: float


def proliferation_effect_standard(params, solution=None):
    sol = solution if solution is not None else solve_deployment(params)
    if not sol.regime.is_hybrid:
        raise DomainError(f"standard-service effect needs regime H, got {sol.regime.value}")
    h, s = sol.chosen, sol.system_s
    eff = StandardEffect(h.standard.price - s.channel.price, h.standard.lead_time - s.channel.lead_time)
    if not (eff.dp_s < 0 and eff.dW_s > 0):
        raise TheoremViolation(f"adding on-demand service should cut p_s and raise W_s: {eff}")
    return eff


@dataclass(frozen=True)
class OnDemandEffect:
    in_t1: bool
    in_t2: bool
    label: str
    dp_o: float
    dW_o: float
    foc_residual: float


def _ol_lstar(lam_o, p):
    r = p.w_s * p.Lambda / p.mu_s
    return math.sqrt(1.0 + r + 2.0 * math.sqrt(r) * lam_o / math.sqrt(p.Lambda ** 2 - lam_o ** 2)) - 1.0


def _sl_lstar(lam_o, p):
    lam = p.Lambda
    r = p.w_s * lam / p.mu_s
    disc = (lam - lam_o) ** 2 + (2.0 * lam - lam_o) * lam_o * (r + 2.0 * math.sqrt(r))
    return (-lam + lam_o + math.sqrt(disc)) / (2.0 * lam - lam_o)


def classify_t1_t2(params, solution=None, tol=1e-6):
    """Evaluate the T1/T2 membership systems at the solved hybrid point.

    tol bounds the relative first-order residual; the lambda_o search only
    pins the optimum to about sqrt(machine eps), so 1e-6 is the useful floor.

    A point belongs to T1 (T2) when it is an interior ol (sl) optimum whose
    lambda_o satisfies the combined first-order condition and the two
    inequalities that compare it with System O. Other regime-H points are
    reported as "unclassified".
    """
    sol = solution if solution is not None else solve_deployment(params)
    if not sol.regime.is_hybrid:
        raise DomainError(f"on-demand effect needs regime H, got {sol.regime.value}")
    h, o = sol.chosen, sol.system_o
    p = params
    lam, K, mu = p.Lambda, p.K, p.mu_o
    lam_o = h.lambda_o_star
    kb = k_bar(p)
    full = K > kb
    L_ref = l_bar_o(p) if full else math.sqrt(p.V * lam + 1.0) - 1.0
    W_ref = L_ref / lam if full else kb * L_ref / (K * lam)
    dp_o = h.ondemand.price - o.channel.price
    dW_o = h.ondemand.lead_time - o.channel.lead_time
    in_t1 = in_t2 = False
    residual = math.nan
    if h.branch == OL and h.interior:
        L = _ol_lstar(lam_o, p)
        target = 2.0 * lam * lam_o / (K * mu * mu)
        residual = abs(L ** 3 / (1.0 + L) - target) / target
        gap = math.sqrt(lam * p.w_s * (lam - lam_o) / (p.mu_s * (lam + lam_o)))
        c1 = L + gap - L_ref
        c2 = 2.0 * lam / (K * mu * mu) - lam_o ** 2 * W_ref ** 3 / (lam_o * W_ref + 1.0)
        in_t1 = residual <= tol and c1 >= 0 and c2 >= 0
    elif h.branch == SL and h.interior:
        L = _sl_lstar(lam_o, p)
        target = 2.0 * lam * lam_o ** 2 / (K * mu * mu * (2.0 * lam - lam_o))
        residual = abs(L ** 3 / (1.0 + L) - target) / target
        x = L_ref / lam
        c = 2.0 * lam / (K * mu * mu * (2.0 * lam - lam_o)) - lam_o * x ** 3 / (lam_o * x + 1.0)
        in_t2 = residual <= tol and c <= 0
    label = "T1" if in_t1 else "T2" if in_t2 else "unclassified"
    res = OnDemandEffect(in_t1, in_t2, label, dp_o, dW_o, residual)
    if in_t1 and not (dp_o <= 0 and dW_o >= 0):
        raise TheoremViolation(f"T1 point should lower p_o and raise W_o: {res}")
    if in_t2 and not (dp_o >= 0 and dW_o <= 0):
        raise TheoremViolation(f"T2 point should raise p_o and lower W_o: {res}")
    return res
