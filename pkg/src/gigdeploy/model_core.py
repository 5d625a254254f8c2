"""Market primitives: parameters, heterogeneity, lead times, participation, demand."""
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import numerics
from .errors import DomainError, InvalidInput, UnstableQueue

INF = math.inf


@dataclass(frozen=True)
class Heterogeneity:
    """Distribution on [0, 1]: uniform, or Beta(a, b)."""

    kind: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "beta"):
            raise InvalidInput(f"unknown distribution kind {self.kind!r}")
        if not (self.a > 0 and self.b > 0):
            raise InvalidInput("beta shapes must be positive")
        if self.kind == "uniform" and (self.a != 1.0 or self.b != 1.0):
            raise InvalidInput("uniform distribution takes no shapes")

    @property
    def is_uniform(self):
        return self.kind == "uniform"

    def cdf(self, x):
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        if self.is_uniform:
            return x
        return numerics.betainc(self.a, self.b, x)

    def pdf(self, x):
        if self.is_uniform:
            return 1.0 if 0.0 <= x <= 1.0 else 0.0
        return numerics.beta_pdf(self.a, self.b, x)

    def ppf(self, u):
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return 1.0
        if self.is_uniform:
            return u
        return numerics.beta_ppf(self.a, self.b, u)

    def partial_mean(self, x):
        """E[T; T <= x], the first moment truncated at x."""
        if x <= 0.0:
            return 0.0
        x = min(x, 1.0)
        if self.is_uniform:
            return 0.5 * x * x
        return self.a / (self.a + self.b) * numerics.betainc(self.a + 1.0, self.b, x)

    def label(self):
        return "uniform" if self.is_uniform else f"beta:{self.a:g},{self.b:g}"


UNIFORM = Heterogeneity()


def beta(a, b):
    return Heterogeneity("beta", float(a), float(b))


def parse_distribution(text):
    """Parse 'uniform' or 'beta:a,b'."""
    text = text.strip().lower()
    if text in ("uniform", "uniform01", "u"):
        return UNIFORM
    if text.startswith("beta:"):
        try:
            a, b = (float(t) for t in text[5:].split(","))
        except ValueError as exc:
            raise InvalidInput(f"bad beta spec {text!r}") from exc
        return beta(a, b)
    raise InvalidInput(f"unknown distribution {text!r}")


@dataclass(frozen=True)
class MarketParams:
    V: float = 2.0
    Lambda: float = 30.0
    K: float = 55.0
    w_s: float = 0.5
    mu_s: float = 1.0
    mu_o: float = 1.0
    theta_dist: Heterogeneity = field(default=UNIFORM)
    r_dist: Heterogeneity = field(default=UNIFORM)
    alpha: float = 1.0

    def __post_init__(self):
        checks = [
            (self.V > 0, "V must be positive"),
            (self.Lambda > 0, "Lambda must be positive"),
            (self.K > 0, "K must be positive"),
            (self.w_s >= 0, "w_s must be nonnegative"),
            (self.mu_s > 0, "mu_s must be positive"),
            (self.mu_o > 0, "mu_o must be positive"),
            (self.alpha > 0, "alpha must be positive"),
        ]
        values = (self.V, self.Lambda, self.K, self.w_s, self.mu_s, self.mu_o, self.alpha)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise InvalidInput("market parameters must be finite numbers")
        for ok, msg in checks:
            if not ok:
                raise InvalidInput(msg)

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def is_base(self):
        return self.theta_dist.is_uniform and self.r_dist.is_uniform and self.alpha == 1.0


@dataclass(frozen=True)
class ChannelState:
    price: float
    wage: float
    servers: float
    arrival_rate: float
    lead_time: float

    @property
    def queue_length(self):
        if self.arrival_rate == 0.0:
            return 0.0
        return self.arrival_rate * self.lead_time


class Regime(enum.Enum):
    S = "S"
    O = "O"
    H1 = "H1"
    H2 = "H2"
    SHUTDOWN = "Shutdown"

    @property
    def is_hybrid(self):
        return self in (Regime.H1, Regime.H2)

    @property
    def band(self):
        """Coarse label used for band checks: S, H or O."""
        return "H" if self.is_hybrid else self.value


# ---------------------------------------------------------------------------
# lead times

def lead_time_mm1(servers, mu, lam):
    if lam < 0 or mu <= 0:
        raise DomainError("need mu > 0 and lambda >= 0")
    slack = servers * mu - lam
    if slack <= 0:
        raise UnstableQueue(f"unstable queue: k*mu={servers * mu} <= lambda={lam}")
    return 1.0 / slack


def staffing_for_lead_time(W, mu, lam):
    if not W > 0:
        raise DomainError("lead time must be positive")
    if mu <= 0 or lam < 0:
        raise DomainError("need mu > 0 and lambda >= 0")
    return (1.0 / W + lam) / mu


def erlang_c(k, a):
    """Delay probability of M/M/k with offered load a = lambda/mu < k."""
    b = 1.0
    for i in range(1, k + 1):
        b = a * b / (i + a * b)
    rho = a / k
    return b / (1.0 - rho * (1.0 - b))


def lead_time_mmk(servers, mu, lam):
    """Mean sojourn time of M/M/k (Erlang-C delay plus one service)."""
    k = int(servers)
    if k != servers or k < 1:
        raise DomainError("M/M/k needs a positive integer server count")
    if lam < 0 or mu <= 0:
        raise DomainError("need mu > 0 and lambda >= 0")
    if lam == 0:
        return 1.0 / mu
    if lam >= k * mu:
        raise UnstableQueue(f"unstable queue: rho = {lam / (k * mu)} >= 1")
    return 1.0 / mu + erlang_c(k, lam / mu) / (k * mu - lam)


def lead_time_mmk_range(k_lo, k_hi, mu, lam):
    """Sojourn times for every integer k in [k_lo, k_hi] (all must be stable).

    Runs the Erlang-B recursion once, so the window costs O(k_hi).
    """
    a = lam / mu
    out = np.empty(k_hi - k_lo + 1)
    b = 1.0
    for i in range(1, k_hi + 1):
        b = a * b / (i + a * b)
        if i >= k_lo:
            rho = a / i
            c = b / (1.0 - rho * (1.0 - b))
            out[i - k_lo] = 1.0 / mu + c / (i * mu - lam)
    return out


# ---------------------------------------------------------------------------
# contractor participation

def contractor_equilibrium(lam_o, w_o, params):
    """Participating contractors k with k = K * P(r <= lam_o * w_o / k)."""
    if lam_o < 0 or w_o < 0:
        raise DomainError("need lambda_o >= 0 and w_o >= 0")
    earnings = lam_o * w_o
    K = params.K
    if earnings == 0.0:
        return 0.0
    if params.r_dist.is_uniform:
        # interior root k^2 = lam*K*w while the hourly earning stays below 1
        return min(K, math.sqrt(earnings * K))
    F = params.r_dist.cdf

    def g(k):
        return k - K * F(earnings / k)

    lo, hi = 1e-12, K
    if g(hi) <= 0.0:
        return K
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-10 * hi:
            break
    return 0.5 * (lo + hi)


def hourly_earning(lam_o, w_o, k_o):
    return lam_o * w_o / k_o if k_o > 0 else 0.0


def wage_for_contractors(k_o, lam_o, params):
    """Per-service wage that makes k_o contractors participate at flow lam_o."""
    if lam_o <= 0 or k_o <= 0:
        return 0.0
    if k_o > params.K * (1.0 + 1e-12):
        raise DomainError("cannot recruit more contractors than the pool")
    h = params.r_dist.ppf(min(k_o / params.K, 1.0))
    return h * k_o / lam_o


# ---------------------------------------------------------------------------
# customer choice

def _utility_lines(p_s, W_s, p_o, W_o, params):
    lines = []
    if math.isfinite(p_s):
        lines.append(("s", params.V - p_s, W_s, p_s))
    if math.isfinite(p_o):
        lines.append(("o", params.alpha * params.V - p_o, W_o, p_o))
    return lines


def choice_segments(p_s, W_s, p_o, W_o, params):
    """Partition of theta in [0, 1] into (lo, hi, channel) pieces, channel in {'s','o',None}.

    Utilities are linear in theta, so the choice is constant between the
    breakpoints where a utility crosses zero or the two cross each other.
    """
    lines = _utility_lines(p_s, W_s, p_o, W_o, params)
    cuts = {0.0, 1.0}
    for _, c, w, _ in lines:
        if w > 0:
            t = c / w
            if 0.0 < t < 1.0:
                cuts.add(t)
    if len(lines) == 2:
        (_, c1, w1, _), (_, c2, w2, _) = lines
        if w1 != w2:
            t = (c1 - c2) / (w1 - w2)
            if 0.0 < t < 1.0:
                cuts.add(t)
    pts = sorted(cuts)
    segs = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        best = None
        best_u = 0.0
        best_p = INF
        for name, c, w, p in lines:
            u = c - mid * w
            if u < 0.0:
                continue
            # ties go to the cheaper channel, then to standard (listed first)
            if best is None or u > best_u + 1e-15 or (abs(u - best_u) <= 1e-15 and p < best_p):
                best, best_u, best_p = name, u, p
        if segs and segs[-1][2] == best:
            segs[-1] = (segs[-1][0], hi, best)
        else:
            segs.append((lo, hi, best))
    return segs


def demand_split(p_s, W_s, p_o, W_o, params):
    """Arrival rates (lambda_s, lambda_o) induced by two price/lead-time offers.

    An absent channel is encoded by an infinite price.
    """
    F = params.theta_dist.cdf
    lam_s = lam_o = 0.0
    for lo, hi, ch in choice_segments(p_s, W_s, p_o, W_o, params):
        mass = F(hi) - F(lo)
        if ch == "s":
            lam_s += mass
        elif ch == "o":
            lam_o += mass
    return params.Lambda * lam_s, params.Lambda * lam_o
