"""Small numerical kernels used by the solvers.

Root finding, multistart golden-section search, adaptive Simpson
quadrature and the regularized incomplete beta function.
"""
import math

import numpy as np

from .errors import NoConvergence

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# cubic L^3 = x (1 + L)

def cubic_root(x):
    """Unique positive root of L**3 = x*(1 + L) for x > 0.

    f(L) = L^3 - xL - x is convex on L > 0 and negative at 0, so Newton
    started to the right of the root decreases monotonically onto it.
    A bisection step is taken if an iterate ever leaves the bracket.
    """
    if x <= 0.0:
        if x == 0.0:
            return 0.0
        raise ValueError("cubic_root needs x >= 0")
    lo, hi = 0.0, max(1.0, math.sqrt(2.0 * x)) * (1.0 + 1e-12) + 1e-300
    L = hi
    for _ in range(200):
        f = L * L * L - x * (1.0 + L)
        if abs(f) <= 1e-15 * (L * L * L + x * (1.0 + L)):
            return L
        if f > 0.0:
            hi = L
        else:
            lo = L
        d = 3.0 * L * L - x
        step = L - f / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - L) <= 1e-16 * L:
            return step
        L = step
    raise NoConvergence(f"cubic_root did not converge for x={x}")


def cubic_root_array(x):
    """Vectorised cubic_root; same iteration applied elementwise."""
    x = np.asarray(x, dtype=float)
    L = np.maximum(1.0, np.sqrt(2.0 * np.maximum(x, 0.0))) * (1.0 + 1e-12)
    for _ in range(100):
        f = L ** 3 - x * (1.0 + L)
        d = 3.0 * L * L - x
        step = np.where(d > 0.0, f / np.where(d > 0.0, d, 1.0), 0.5 * L)
        L_new = np.maximum(L - step, 0.5 * L)
        if np.all(np.abs(L_new - L) <= 1e-15 * np.maximum(L, 1e-300)):
            L = L_new
            break
        L = L_new
    return np.where(x > 0.0, L, 0.0)


# ---------------------------------------------------------------------------
# scalar root bracketing

def bisect(f, lo, hi, rtol=1e-12, atol=0.0, maxiter=300):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NoConvergence(f"bisect: no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= atol + rtol * max(abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# 1-D maximisation

def golden_max(f, a, b, rtol=1e-10, maxiter=200):
    """Golden-section search for a maximum of f on [a, b].

    Returns (x, f(x)) for the best point seen, the endpoints included.
    """
    fa, fb = f(a), f(b)
    best_x, best_f = (a, fa) if fa >= fb else (b, fb)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    scale = max(abs(a), abs(b), 1e-300)
    it = 0
    while b - a > rtol * scale and it < maxiter:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
    for x, fx in ((x1, f1), (x2, f2)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def local_maxima(values):
    """Indices of (weak) local maxima of a 1-D array, -inf entries skipped."""
    v = np.asarray(values, dtype=float)
    n = v.size
    idx = []
    for i in range(n):
        if not np.isfinite(v[i]):
            continue
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < n - 1 else -np.inf
        if v[i] >= left and v[i] >= right:
            idx.append(i)
    return idx


def zoom_max(f_vec, a, b, rtol=1e-10, n=17, maxiter=60):
    """Bracket-shrinking grid search: evaluate n points, keep the two cells
    around the best one, repeat. Each round is one vectorised call."""
    best_x, best_f = a, -np.inf
    scale = max(abs(a), abs(b), 1e-300)
    for _ in range(maxiter):
        xs = np.linspace(a, b, n)
        vals = np.asarray(f_vec(xs), dtype=float)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        i = int(np.argmax(vals))
        if vals[i] > best_f:
            best_x, best_f = float(xs[i]), float(vals[i])
        if b - a <= rtol * scale or not np.isfinite(vals[i]):
            break
        a, b = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, n - 1)])
    return best_x, best_f


def scan_maximize(f_vec, f, lo, hi, n_scan=1024, n_starts=8, rtol=1e-10, grid=None,
                  polish="golden"):
    """Dense pre-scan followed by a polish of the best local maxima.

    f_vec maps an array of abscissae to values; f is the scalar version.
    polish is "golden" (scalar golden section) or "zoom" (vectorised grid
    refinement, cheaper when f_vec is much faster than repeated f calls).
    Returns (x, fx, scan_x, scan_f).
    """
    xs = np.linspace(lo, hi, n_scan) if grid is None else np.asarray(grid, dtype=float)
    vals = np.asarray(f_vec(xs), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    cand = local_maxima(vals)
    if not cand:
        return float("nan"), -np.inf, xs, vals
    cand.sort(key=lambda i: -vals[i])
    i0 = cand[0]
    best_x, best_f = float(xs[i0]), float(vals[i0])
    for i in cand[:n_starts]:
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, xs.size - 1)]
        if polish == "zoom":
            x, fx = zoom_max(f_vec, float(a), float(b), rtol=rtol)
        else:
            x, fx = golden_max(f, float(a), float(b), rtol=rtol)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f, xs, vals


def nelder_mead_max(f, x0, step, xtol=1e-10, ftol=1e-13, maxiter=4000):
    """Maximise f from x0 with the Nelder-Mead simplex.

    step sets the initial simplex edge per coordinate. Returns
    (x, fx, converged). Non-finite values count as -inf.
    """
    n = len(x0)

    def g(x):
        v = f(x)
        return -v if math.isfinite(v) else math.inf

    pts = [np.asarray(x0, dtype=float)]
    for i in range(n):
        p = pts[0].copy()
        p[i] += step[i]
        pts.append(p)
    vals = [g(p) for p in pts]
    converged = False
    for _ in range(maxiter):
        order = sorted(range(n + 1), key=vals.__getitem__)
        pts = [pts[i] for i in order]
        vals = [vals[i] for i in order]
        spread = max(float(np.max(np.abs(p - pts[0]))) for p in pts[1:])
        if spread <= xtol * max(1.0, float(np.max(np.abs(pts[0])))) or (
                math.isfinite(vals[-1]) and vals[-1] - vals[0] <= ftol * max(1.0, abs(vals[0]))):
            converged = True
            break
        c = sum(pts[:-1]) / n
        xr = c + (c - pts[-1])
        fr = g(xr)
        if fr < vals[0]:
            xe = c + 2.0 * (c - pts[-1])
            fe = g(xe)
            pts[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = c + 0.5 * (xr - c)
            else:
                xc = c + 0.5 * (pts[-1] - c)
            fc = g(xc)
            if fc < min(fr, vals[-1]):
                pts[-1], vals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                    vals[i] = g(pts[i])
    i = int(np.argmin(vals))
    return pts[i], -vals[i], converged


# ---------------------------------------------------------------------------
# quadrature

def adaptive_simpson(f, a, b, tol=1e-8, max_panels=2 ** 20):
    """Adaptive Simpson rule with an explicit stack; absolute tolerance tol."""
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    stack = [(a, b, fa, fm, fb, whole, tol)]
    total = 0.0
    panels = 1
    while stack:
        a0, b0, fa0, fm0, fb0, s, eps = stack.pop()
        m = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m), 0.5 * (m + b0)
        flm, frm = f(lm), f(rm)
        left = (m - a0) * (fa0 + 4.0 * flm + fm0) / 6.0
        right = (b0 - m) * (fm0 + 4.0 * frm + fb0) / 6.0
        err = left + right - s
        if abs(err) <= 15.0 * eps or b0 - a0 < 1e-15 * max(1.0, abs(a0)):
            total += left + right + err / 15.0
            continue
        panels += 1
        if panels > max_panels:
            raise NoConvergence("adaptive_simpson exceeded panel cap")
        stack.append((a0, m, fa0, flm, fm0, left, 0.5 * eps))
        stack.append((m, b0, fm0, frm, fb0, right, 0.5 * eps))
    return total


# ---------------------------------------------------------------------------
# incomplete beta (continued fraction, modified Lentz)

_TINY = 1e-300


def _betacf(a, b, x, tol=1e-15, maxiter=500):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, maxiter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise NoConvergence(f"betacf failed for a={a}, b={b}, x={x}")


def log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    bt = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def beta_pdf(a, b, x):
    if x < 0.0 or x > 1.0:
        return 0.0
    if x == 0.0 or x == 1.0:
        edge = a if x == 0.0 else b
        if edge < 1.0:
            return math.inf
        if edge > 1.0:
            return 0.0
        return math.exp(-log_beta(a, b))
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_beta(a, b))


def beta_ppf(a, b, u, tol=1e-12):
    """Quantile of Beta(a, b) by Newton steps kept inside a bisection bracket."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    for _ in range(200):
        fx = betainc(a, b, x) - u
        if fx > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= tol * max(x, 1e-300):
            break
        pdf = beta_pdf(a, b, x)
        xn = x - fx / pdf if pdf > 0.0 and math.isfinite(pdf) else 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(x, 1e-300):
            x = xn
            break
        x = xn
    return x
