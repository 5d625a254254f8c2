"""Independent checks: brute-force grids, a queue simulator, a market simulator.

Nothing here touches the solver modules. The objectives are written out
directly in (arrival rate, lead time) variables and searched on zooming
grids, so agreement with the closed forms is a genuine second opinion.
"""
import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse, InvalidInput, UnstableQueue
from .model_core import demand_split

# two-sided 95% Student t quantiles by degrees of freedom
_T95 = {1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365, 8: 2.306,
        9: 2.262, 10: 2.228, 12: 2.179, 15: 2.131, 20: 2.086, 30: 2.042}


def _t95(df):
    if df in _T95:
        return _T95[df]
    below = [d for d in _T95 if d < df]
    return _T95[max(below)] if df < 30 else 1.96


@dataclass(frozen=True)
class GridSpec:
    """Box (lo, hi, n) per dimension plus the number of zoom passes."""

    dims: tuple
    refinement_rounds: int = 3

    def __post_init__(self):
        for lo, hi, n in self.dims:
            if n < 16 or not hi > lo:
                raise InvalidInput(f"grid dimension needs n >= 16 and hi > lo, got {(lo, hi, n)}")
        if self.refinement_rounds < 0:
            raise InvalidInput("refinement_rounds must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    horizon_services: int = 100_000
    warmup_fraction: float = 0.1
    seed: int = 12345
    replications: int = 10

    def __post_init__(self):
        if self.horizon_services < 10_000:
            raise InvalidInput("horizon must be at least 1e4 services")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidInput("warmup fraction must lie in [0, 1)")
        if self.replications < 2:
            raise InvalidInput("need at least two replications for a CI")


# ---------------------------------------------------------------------------
# zooming grid search

def _grid_search(f, dims, rounds, n_keep=4):
    """Maximise a vectorised f over a box; zoom around the best few cells each round.

    Returns (best value, best point, history of best values per round).
    """
    boxes = [[(lo, hi) for lo, hi, _ in dims]]
    ns = [n for _, _, n in dims]
    bounds = [(lo, hi) for lo, hi, _ in dims]
    best_v, best_x = -np.inf, None
    history = []
    for _ in range(rounds + 1):
        new_boxes = []
        for box in boxes:
            axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(box, ns)]
            mesh = np.meshgrid(*axes, indexing="ij")
            with np.errstate(all="ignore"):
                vals = f(*mesh)
            vals = np.where(np.isfinite(vals), vals, -np.inf)
            flat = vals.ravel()
            order = np.argsort(flat)[::-1]
            picked = []
            for idx in order:
                if not np.isfinite(flat[idx]):
                    break
                ijk = np.unravel_index(idx, vals.shape)
                if all(max(abs(a - b) for a, b in zip(ijk, q)) > 2 for q in picked):
                    picked.append(ijk)
                if len(picked) >= n_keep:
                    break
            for q in picked:
                v = vals[q]
                x = tuple(ax[i] for ax, i in zip(axes, q))
                if v > best_v:
                    best_v, best_x = v, x
                nb = []
                for d, i in enumerate(q):
                    h = axes[d][1] - axes[d][0]
                    lo = max(bounds[d][0], axes[d][i] - 2 * h)
                    hi = min(bounds[d][1], axes[d][i] + 2 * h)
                    nb.append((lo, hi))
                new_boxes.append((v, nb))
        history.append(float(best_v))
        new_boxes.sort(key=lambda vb: -vb[0])
        boxes = [b for _, b in new_boxes[:n_keep]]
    if len(history) >= 2:
        last, prev = history[-1], history[-2]
        if abs(last - prev) > 0.01 * max(abs(last), 1e-12):
            warnings.warn(f"refinement moved the optimum from {prev} to {last}", GridTooCoarse)
    return float(best_v), best_x, history


def default_grid_s(params, n=128, rounds=4):
    return GridSpec(((0.0, params.Lambda, n), (-4.0, math.log10(10.0 * params.V), n)), rounds)


def default_grid_o(params, n=128, rounds=4):
    return GridSpec(((0.0, params.Lambda, n), (-3.0, math.log10(2.0 * params.V * params.Lambda), n)), rounds)


def default_grid_h(params, n=32, rounds=3):
    lam = params.Lambda
    w_hi = math.log10(10.0 * params.V)
    return GridSpec(((0.0, lam, n), (-4.0, w_hi, n), (0.0, lam, n), (-4.0, w_hi, n)), rounds)


# ---------------------------------------------------------------------------
# raw objectives

def objective_s(lam_s, W_s, params):
    """System S profit at (arrival rate, lead time), before any reduction."""
    V, lam, w, mu = params.V, params.Lambda, params.w_s, params.mu_s
    return lam_s * (V - lam_s * W_s / lam) - w / (mu * W_s) - w * lam_s / mu


def objective_o(lam_o, L_o, params):
    """System O profit at (arrival rate, queue length)."""
    V, lam, K, mu = params.V, params.Lambda, params.K, params.mu_o
    return lam_o * (V - L_o / lam) - lam_o ** 2 / (K * mu * mu) * (1.0 / L_o + 1.0) ** 2


def objective_h(lam_s, W_s, lam_o, W_o, params):
    """Two-service profit with both channels open (market ordering via min{W_o, W_s})."""
    V, lam, w, mu_s = params.V, params.Lambda, params.w_s, params.mu_s
    K, mu_o = params.K, params.mu_o
    cross = 2.0 * lam_s * lam_o * np.minimum(W_o, W_s)
    val = (V * (lam_s + lam_o) - (lam_s ** 2 * W_s + cross + lam_o ** 2 * W_o) / lam
           - w / mu_s * (1.0 / W_s + lam_s) - (1.0 / W_o + lam_o) ** 2 / (K * mu_o * mu_o))
    return np.where(lam_s + lam_o <= lam * (1.0 + 1e-12), val, -np.inf)


# ---------------------------------------------------------------------------
# brute force optimisers

def brute_force_single_s(params, grid=None):
    """(profit, lambda_s, W_s); shutdown (0, 0, inf) when nothing beats zero."""
    grid = grid or default_grid_s(params)
    v, x, _ = _grid_search(lambda l, lw: objective_s(l, 10.0 ** lw, params),
                           grid.dims, grid.refinement_rounds)
    if v <= 0.0:
        return 0.0, 0.0, math.inf
    return v, x[0], 10.0 ** x[1]


def brute_force_single_o(params, grid=None):
    """(profit, lambda_o, L_o)."""
    grid = grid or default_grid_o(params)
    v, x, _ = _grid_search(lambda l, lL: objective_o(l, 10.0 ** lL, params),
                           grid.dims, grid.refinement_rounds)
    return v, x[0], 10.0 ** x[1]


@dataclass(frozen=True)
class HybridOracle:
    profit: float
    lambda_s: float
    W_s: float
    lambda_o: float
    W_o: float
    best_single: float

    @property
    def overall(self):
        """Best of the 4-D grid and the two single-service oracles."""
        return max(self.profit, self.best_single)


def brute_force_hybrid(params, grid=None, single=True):
    grid = grid or default_grid_h(params)

    def f(ls, lws, lo, lwo):
        return objective_h(ls, 10.0 ** lws, lo, 10.0 ** lwo, params)

    v, x, _ = _grid_search(f, grid.dims, grid.refinement_rounds)
    best_single = -math.inf
    if single:
        best_single = max(brute_force_single_s(params)[0], brute_force_single_o(params)[0])
    return HybridOracle(v, x[0], 10.0 ** x[1], x[2], 10.0 ** x[3], best_single)


# ---------------------------------------------------------------------------
# discrete-event queue simulation

def _replication_rng(seed, rep):
    return np.random.default_rng([int(seed), int(rep)])


def _simulate_once(k, mu, lam, n, warmup, rng):
    """Mean sojourn of FCFS M/M/k over n customers, first `warmup` discarded.

    The event list holds the pending departure times, one per busy or idle
    server slot; each arrival is an event that pops the earliest departure.
    """
    inter = rng.exponential(1.0 / lam, n)
    service = rng.exponential(1.0 / mu, n)
    arrivals = np.cumsum(inter)
    free_at = [0.0] * k
    heapq.heapify(free_at)
    total = 0.0
    count = 0
    for i in range(n):
        t = arrivals[i]
        start = max(t, free_at[0])
        done = start + service[i]
        heapq.heapreplace(free_at, done)
        if i >= warmup:
            total += done - t
            count += 1
    return total / count


def simulate_queue(servers, mu, lam, sim=None):
    """(mean sojourn, 95% CI half-width) across independent replications."""
    sim = sim or SimConfig()
    k = int(servers)
    if k != servers or k < 1:
        raise InvalidInput("simulation needs a positive integer server count")
    if lam >= k * mu:
        raise UnstableQueue(f"unstable queue: lambda={lam} >= k*mu={k * mu}")
    if lam == 0.0:
        return 1.0 / mu, 0.0
    n = sim.horizon_services // sim.replications
    warm = int(sim.warmup_fraction * n)
    means = np.array([_simulate_once(k, mu, lam, n, warm, _replication_rng(sim.seed, r))
                      for r in range(sim.replications)])
    half = _t95(sim.replications - 1) * means.std(ddof=1) / math.sqrt(sim.replications)
    return float(means.mean()), float(half)


# ---------------------------------------------------------------------------
# Monte Carlo market

@dataclass(frozen=True)
class MarketSample:
    lambda_s: float
    lambda_o: float
    k_o: float
    profit: float
    se_lambda_s: float
    se_lambda_o: float
    se_k_o: float


def _draw(dist, rng, n):
    if dist.is_uniform:
        return rng.random(n)
    return rng.beta(dist.a, dist.b, n)


def _empirical_participation(r, earnings):
    """Largest k with #{r_i <= earnings / k} >= k: the stable participation level."""
    r = np.sort(r)
    K = r.size
    for k in range(K, 0, -1):
        if np.searchsorted(r, earnings / k, side="right") >= k:
            return k
    return 0


def simulate_market(policy, params, sim=None):
    """Sample customer choices and contractor sign-ups for a posted policy.

    policy is (standard, ondemand); each entry has price, lead_time and
    wage and servers fields, or is None for an absent channel.
    """
    sim = sim or SimConfig()
    std, od = policy
    V, a, lam = params.V, params.alpha, params.Lambda
    n = sim.horizon_services
    shares = []
    ks = []
    profits = []
    for rep in range(sim.replications):
        rng = _replication_rng(sim.seed, rep)
        theta = _draw(params.theta_dist, rng, n)
        u_s = V - std.price - theta * std.lead_time if std is not None else np.full(n, -np.inf)
        u_o = a * V - od.price - theta * od.lead_time if od is not None else np.full(n, -np.inf)
        best = np.maximum(u_s, u_o)
        join = best >= 0.0
        pick_s = join & ((u_s > u_o) | ((u_s == u_o) & (
            (std.price if std is not None else np.inf) <= (od.price if od is not None else np.inf))))
        pick_o = join & ~pick_s
        fs, fo = pick_s.mean(), pick_o.mean()
        shares.append((fs, fo))
        lam_s, lam_o = lam * fs, lam * fo
        k_o = 0.0
        if od is not None and lam_o > 0.0:
            r = _draw(params.r_dist, rng, int(round(params.K)))
            k_o = float(_empirical_participation(r, lam_o * od.wage))
        ks.append(k_o)
        pr = 0.0
        if std is not None:
            pr += std.price * lam_s - params.w_s * std.servers
        if od is not None:
            pr += (od.price - od.wage) * lam_o
        profits.append(pr)
    shares = np.array(shares)
    ks = np.array(ks)
    R = sim.replications
    se = shares.std(axis=0, ddof=1) / math.sqrt(R)
    return MarketSample(
        lambda_s=float(lam * shares[:, 0].mean()),
        lambda_o=float(lam * shares[:, 1].mean()),
        k_o=float(ks.mean()),
        profit=float(np.mean(profits)),
        se_lambda_s=float(lam * se[0]),
        se_lambda_o=float(lam * se[1]),
        se_k_o=float(ks.std(ddof=1) / math.sqrt(R)),
    )


def analytic_shares(policy, params):
    """demand_split for the same policy, for side-by-side comparison."""
    std, od = policy
    p_s = std.price if std is not None else math.inf
    W_s = std.lead_time if std is not None else 1.0
    p_o = od.price if od is not None else math.inf
    W_o = od.lead_time if od is not None else 1.0
    return demand_split(p_s, W_s, p_o, W_o, params)
