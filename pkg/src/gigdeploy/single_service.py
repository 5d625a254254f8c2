"""Closed-form optima for the standard-only (S) and on-demand-only (O) systems."""
import math
from dataclasses import dataclass

from .errors import DomainError
from .model_core import INF, ChannelState, Regime
from .numerics import cubic_root

FULL = "FullCoverage"
PARTIAL = "PartialCoverage"
SHUTDOWN = "Shutdown"
DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class Thresholds:
    c_bar_s: float
    c_bar_o: float
    k_bar: float
    l_bar_o: float


@dataclass(frozen=True)
class SingleSolution:
    channel: ChannelState
    profit: float
    regime: Regime
    branch: str
    system: str  # "S" or "O"

    @property
    def degenerate(self):
        return self.branch == DEGENERATE


@dataclass(frozen=True)
class StaffingSplit:
    mean_capacity: float
    safety_capacity: float
    predicted_safety: float


def _root61(params):
    return math.sqrt(params.V * params.Lambda + 1.0)


def k_bar(params):
    s = _root61(params)
    return 2.0 * params.Lambda ** 2 * s / (params.mu_o ** 2 * (s - 1.0) ** 3)


def l_bar_o(params, K=None):
    K = params.K if K is None else K
    return cubic_root(2.0 * params.Lambda ** 2 / (K * params.mu_o ** 2))


def k_from_l_bar(L, params):
    """Inverse of K -> l_bar_o: the pool size whose full-coverage queue length is L."""
    return 2.0 * params.Lambda ** 2 * (1.0 + L) / (params.mu_o ** 2 * L ** 3)


def c_bar_s(params):
    w, lam, mu = params.w_s, params.Lambda, params.mu_s
    return w / mu + 2.0 * math.sqrt(w / (lam * mu))


def compute_thresholds(params):
    if params.w_s < 0:
        raise DomainError("w_s must be nonnegative")
    L = l_bar_o(params)
    return Thresholds(
        c_bar_s=c_bar_s(params),
        c_bar_o=L * (3.0 + L) / (2.0 * params.Lambda),
        k_bar=k_bar(params),
        l_bar_o=L,
    )


def solve_system_s(params):
    V, lam, w, mu = params.V, params.Lambda, params.w_s, params.mu_s
    if w == 0.0:
        ch = ChannelState(price=V, wage=0.0, servers=INF, arrival_rate=lam, lead_time=0.0)
        return SingleSolution(ch, V * lam, Regime.S, DEGENERATE, "S")
    cs = c_bar_s(params)
    if V >= cs:
        W = math.sqrt(w / (lam * mu))
        ch = ChannelState(
            price=V - W,
            wage=w,
            servers=lam / mu + math.sqrt(lam / (mu * w)),
            arrival_rate=lam,
            lead_time=W,
        )
        return SingleSolution(ch, lam * (V - cs), Regime.S, FULL, "S")
    ch = ChannelState(price=V, wage=w, servers=0.0, arrival_rate=0.0, lead_time=INF)
    return SingleSolution(ch, 0.0, Regime.SHUTDOWN, SHUTDOWN, "S")


def solve_system_o(params):
    V, lam, K, mu = params.V, params.Lambda, params.K, params.mu_o
    s = _root61(params)
    kb = k_bar(params)
    if K >= kb:
        L = l_bar_o(params)
        ch = ChannelState(
            price=V - L / lam,
            wage=L * (1.0 + L) / (2.0 * lam),
            servers=lam * (1.0 + L) / (mu * L),
            arrival_rate=lam,
            lead_time=L / lam,
        )
        return SingleSolution(ch, lam * V - 0.5 * L * (3.0 + L), Regime.O, FULL, "O")
    L = s - 1.0
    lam_o = K * mu ** 2 * L ** 3 / (2.0 * lam * s)
    W = L / lam_o
    k_o = (1.0 / W + lam_o) / mu
    ch = ChannelState(
        price=V - L / lam,
        wage=k_o ** 2 / (K * lam_o),
        servers=k_o,
        arrival_rate=lam_o,
        lead_time=W,
    )
    return SingleSolution(ch, K * mu ** 2 * L ** 4 / (4.0 * lam ** 2), Regime.O, PARTIAL, "O")


def staffing_decomposition(solution, params):
    ch = solution.channel
    if ch.arrival_rate <= 0 or not math.isfinite(ch.servers):
        raise DomainError("staffing split needs an operating, non-degenerate solution")
    lam = ch.arrival_rate
    if solution.system == "S":
        mu = params.mu_s
        predicted = math.sqrt(lam / (mu * params.w_s))
    else:
        mu = params.mu_o
        hourly = ch.wage * lam / ch.servers
        kb = k_bar(params)
        predicted = math.sqrt(lam / (mu * hourly * max(2.0 * kb / params.K, 2.0)))
    mean = lam / mu
    return StaffingSplit(mean, ch.servers - mean, predicted)
