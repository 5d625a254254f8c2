"""Run configuration, CSV/JSON writers, sweeps, figure data and the validation suite.

Everything here is plumbing around the solvers; the command-line layer in
cli.py only parses arguments and maps exceptions to exit codes.
"""
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .analysis import (flexible_equivalence_check, profit_ratio, proliferation_value,
                       threshold_curves)
from .errors import GigDeployError, InvalidInput
from .extensions import (MM1, MMK, ExtensionConfig, regime_map_general,
                         solve_deployment_general)
from .hybrid import (classify_regime_map, classify_t1_t2, ol_profile, region_boundary,
                     sl_profile, solve_deployment, wo_interior_ol, wo_interior_sl, ws_given_ol,
                     ws_given_sl)
from .model_core import UNIFORM, MarketParams, lead_time_mm1, lead_time_mmk, parse_distribution
from .oracle import (SimConfig, analytic_shares, brute_force_hybrid, brute_force_single_o,
                     brute_force_single_s, simulate_market, simulate_queue)
from .single_service import solve_system_o, solve_system_s
from .sweeps import Axis, SweepSpec, default_jobs, parallel_map, regime_grid
from .welfare import welfare_generic, welfare_of

PARAM_KEYS = ("V", "Lambda", "K", "w_s", "mu_s", "mu_o", "alpha")
KEY_ALIASES = {
    "ws": "w_s", "mu-s": "mu_s", "mu-o": "mu_o", "lambda": "Lambda", "Lam": "Lambda",
    "queue-model": "queue_model", "theta-dist": "theta_dist", "r-dist": "r_dist",
    "out": "output_path", "output-path": "output_path",
}
FORMATS = ("csv", "json", "table")
FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "figA1", "figMMk")


@dataclass(frozen=True)
class RunConfig:
    params: MarketParams = field(default_factory=MarketParams)
    extension: ExtensionConfig = field(default_factory=ExtensionConfig)
    sweep: tuple = ()            # Axis objects, in the order given
    output_path: str = None
    format: str = "csv"
    seed: int = 12345
    jobs: int = 1

    def __post_init__(self):
        if self.format not in FORMATS:
            raise InvalidInput(f"format must be one of {FORMATS}, got {self.format!r}")
        if not (isinstance(self.jobs, int) and self.jobs >= 1):
            raise InvalidInput("jobs must be a positive integer")
        if not isinstance(self.seed, int):
            raise InvalidInput("seed must be an integer")

    @property
    def is_base(self):
        return self.params.is_base and self.extension.queue_model == MM1


def build_config(values):
    """RunConfig from a flat dict (config file merged with flags, flags winning)."""
    vals = {}
    for k, v in values.items():
        if v is None:
            continue
        vals[KEY_ALIASES.get(k, k)] = v
    known = set(PARAM_KEYS) | {"theta_dist", "r_dist", "queue_model", "sweep", "output_path",
                               "format", "seed", "jobs"}
    unknown = sorted(set(vals) - known)
    if unknown:
        raise InvalidInput(f"unknown config keys: {unknown}")
    kw = {}
    for k in PARAM_KEYS:
        if k in vals:
            try:
                kw[k] = float(vals[k])
            except (TypeError, ValueError) as exc:
                raise InvalidInput(f"{k} must be a number") from exc
    theta = _dist(vals.get("theta_dist", UNIFORM))
    r = _dist(vals.get("r_dist", UNIFORM))
    params = MarketParams(theta_dist=theta, r_dist=r, **kw)
    qm = str(vals.get("queue_model", MM1))
    qm = {"mm1": MM1, "mmk": MMK}.get(qm.lower(), qm)
    ext = ExtensionConfig(qm, params.theta_dist, params.r_dist, params.alpha)
    sweep = vals.get("sweep", ())
    if isinstance(sweep, str):
        sweep = [sweep]
    axes = tuple(a if isinstance(a, Axis) else Axis.parse(str(a)) for a in sweep)
    jobs = vals.get("jobs", default_jobs())
    seed = vals.get("seed", 12345)
    try:
        jobs, seed = int(jobs), int(seed)
    except (TypeError, ValueError) as exc:
        raise InvalidInput("jobs and seed must be integers") from exc
    return RunConfig(params, ext, axes, vals.get("output_path"), str(vals.get("format", "csv")),
                     seed, jobs)


def _dist(x):
    return x if not isinstance(x, str) else parse_distribution(x)


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInput("config file must hold a flat JSON object")
    return data


# ---------------------------------------------------------------------------
# serialisation

def fmt(x):
    """Locale-free text for one CSV field; floats carry 17 significant digits."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(getattr(x, "value", x))


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_safe(x):
    if isinstance(x, dict):
        return {k: json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(x, np.integer):
        return int(x)
    return getattr(x, "value", x)


def table_text(columns, rows, fmt_out="csv"):
    if fmt_out == "json":
        return json.dumps([json_safe(dict(zip(columns, r))) for r in rows], indent=1) + "\n"
    if fmt_out == "table":
        cells = [list(columns)] + [[fmt(v) for v in r] for r in rows]
        widths = [max(len(c[i]) for c in cells) for i in range(len(columns))]
        return "".join("  ".join(c[i].rjust(widths[i]) for i in range(len(c))) + "\n" for c in cells)
    return csv_text(columns, rows)


def emit(text, path):
    if path in (None, "", "-"):
        print(text, end="")
        return
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# solve

def _channel_dict(ch):
    if ch is None:
        return None
    return {"price": ch.price, "wage": ch.wage, "servers": ch.servers,
            "arrival_rate": ch.arrival_rate, "lead_time": ch.lead_time}


def deployment(params, ext):
    if params.is_base and ext.queue_model == MM1:
        return solve_deployment(params)
    return solve_deployment_general(params, ext)


def welfare_for(sol, params, base):
    if base:
        return welfare_of(sol, params)
    return welfare_generic(*sol.channels(), params)


def solve_report(cfg):
    p = cfg.params
    sol = deployment(p, cfg.extension)
    rep = welfare_for(sol, p, cfg.is_base)
    std, od = sol.channels()
    branch = sol.chosen.branch
    return {
        "params": {k: getattr(p, k) for k in PARAM_KEYS} | {
            "theta_dist": p.theta_dist.label(), "r_dist": p.r_dist.label(),
            "queue_model": cfg.extension.queue_model},
        "regime": sol.regime.value,
        "pi_s": sol.pi_s, "pi_o": sol.pi_o, "pi_h": sol.pi_h, "pi_star": sol.pi_star,
        "branch": branch,
        "standard": _channel_dict(std),
        "ondemand": _channel_dict(od),
        "welfare": {"profit": rep.profit, "cs": rep.cs, "lw": rep.lw, "sw": rep.sw,
                    "identity_residual": rep.identity_residual},
    }


def report_table(rep):
    lines = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}{k}." if isinstance(v, dict) else f"{prefix}{k}", v)
        else:
            lines.append((prefix.rstrip("."), "-" if obj is None else fmt(obj)))

    walk("", rep)
    w = max(len(k) for k, _ in lines)
    return "".join(f"{k.ljust(w)}  {v}\n" for k, v in lines)


# ---------------------------------------------------------------------------
# regime maps

REGIME_COLUMNS = ("ws", "K", "regime", "pi_s", "pi_o", "pi_h", "pi_star")


def map_spec(axes, n_default=64):
    """(K, w_s) SweepSpec from user axes; missing axes take the default grid."""
    base = regime_grid(n_default, n_default)
    by = {a.field: a for a in base.axes}
    for a in axes:
        if a.field not in ("K", "w_s"):
            raise InvalidInput(f"regime maps sweep ws and K only, got {a.name!r}")
        by[a.field] = a
    return SweepSpec((by["K"], by["w_s"]))


def regime_map(cfg, spec=None, check=False):
    spec = spec or map_spec(cfg.sweep)
    if cfg.is_base:
        return classify_regime_map(cfg.params, spec, jobs=cfg.jobs, check=check)
    return regime_map_general(cfg.params, cfg.extension, spec, jobs=cfg.jobs, check=check)


def regime_rows(rmap):
    rows = []
    for i, K in enumerate(rmap.K):
        for j, w in enumerate(rmap.ws):
            rows.append((float(w), float(K), rmap.labels[i][j].value, rmap.pi_s[i, j],
                         rmap.pi_o[i, j], rmap.pi_h[i, j], rmap.pi_star[i, j]))
    return rows


# ---------------------------------------------------------------------------
# parameter sweeps

METRIC_COLUMNS = ("R", "delta_o", "delta_s", "delta_o_cs", "delta_s_cs", "delta_o_lw",
                  "delta_s_lw", "delta_o_sw", "delta_s_sw")
THRESHOLD_COLUMNS = ("k_F", "k_S", "k_L_lo", "k_L_hi", "k_C_lo", "k_C_hi")
NAN = float("nan")


def _ratio(a, b):
    return 1.0 - a / b if b != 0.0 else NAN


def sweep_cell(args):
    p, ext = args
    base = p.is_base and ext.queue_model == MM1
    if base:
        sol = solve_deployment(p)
        try:
            R = profit_ratio(p)
        except GigDeployError:
            R = NAN
        try:
            pv = proliferation_value(p, sol, check=False)
            d = pv.welfare_deltas
            deltas = [pv.delta_o, pv.delta_s] + [d[f"delta_{c}_{m}"] for m in ("cs", "lw", "sw")
                                                 for c in ("o", "s")]
        except GigDeployError:
            deltas = [NAN] * 8
        try:
            thr = list(threshold_curves(p.w_s, p).as_dict().values())
        except GigDeployError:
            thr = [NAN] * 6
        return [R] + deltas + thr
    sol = solve_deployment_general(p, ext)
    star = welfare_generic(*sol.channels(), p)
    s = welfare_generic(sol.system_s.channel if sol.system_s.channel.arrival_rate > 0 else None,
                        None, p)
    o = welfare_generic(None, sol.system_o.channel if sol.system_o.channel.arrival_rate > 0
                        else None, p)
    R = sol.pi_s / sol.pi_o if sol.pi_o > 0 else NAN
    deltas = [_ratio(sol.pi_s, sol.pi_star), _ratio(sol.pi_o, sol.pi_star)]
    for m in ("cs", "lw", "sw"):
        deltas += [_ratio(s.get(m), star.get(m)), _ratio(o.get(m), star.get(m))]
    return [R] + deltas + [NAN] * 6


def run_sweep(cfg):
    axes = cfg.sweep or (Axis.parse("ws:0.05:1.0:64"),)
    spec = SweepSpec(tuple(axes))
    pts = spec.points()
    cells = parallel_map(sweep_cell, [(spec.apply(cfg.params, pt), cfg.extension) for pt in pts],
                         cfg.jobs)
    cols = tuple(a.name for a in axes) + METRIC_COLUMNS + THRESHOLD_COLUMNS
    rows = [list(pt) + vals for pt, vals in zip(pts, cells)]
    return cols, rows


# ---------------------------------------------------------------------------
# figure data

def _fig1(res):
    """Single-service optima: System S along w_s, System O along K, for V in {0.8, 1, 1.2}."""
    cols = ("system", "V", "w_s", "K", "branch", "price", "wage", "servers", "arrival_rate",
            "lead_time", "profit")
    rows = []
    for V in (0.8, 1.0, 1.2):
        for w in np.linspace(0.01, 1.0, res):
            p = MarketParams(V=V, w_s=float(w))
            s = solve_system_s(p)
            c = s.channel
            rows.append(("S", V, float(w), p.K, s.branch, c.price, c.wage, c.servers,
                         c.arrival_rate, c.lead_time, s.profit))
        for K in np.linspace(1.0, 100.0, res):
            p = MarketParams(V=V, K=float(K))
            o = solve_system_o(p)
            c = o.channel
            rows.append(("O", V, p.w_s, float(K), o.branch, c.price, c.wage, c.servers,
                         c.arrival_rate, c.lead_time, o.profit))
    return {"fig1": (cols, rows)}


def _fig2_cell(p):
    s, o = welfare_of(solve_system_s(p), p), welfare_of(solve_system_o(p), p)
    return [profit_ratio(p), s.sw, o.sw, s.lw, o.lw, s.cs, o.cs]


def _fig2(res, jobs):
    spec = regime_grid(res, res)
    pts = spec.points()
    base = MarketParams()
    vals = parallel_map(_fig2_cell, [spec.apply(base, pt) for pt in pts], jobs)
    cols = ("ws", "K", "R", "sw_s", "sw_o", "lw_s", "lw_o", "cs_s", "cs_o")
    rows = [(w, K, *v) for (K, w), v in zip(pts, vals)]
    thr_cols = ("ws",) + THRESHOLD_COLUMNS
    thr = [(float(w),) + tuple(threshold_curves(float(w), base).as_dict().values())
           for w in spec.axes[1].values]
    return {"fig2_ratio": (cols, rows), "fig2_thresholds": (thr_cols, thr)}


def _fig3(res, jobs):
    rmap = classify_regime_map(MarketParams(), regime_grid(res, res), jobs=jobs, check=False)
    return {"fig3": (REGIME_COLUMNS, regime_rows(rmap))}


def _fig4_cell(p):
    sol = solve_deployment(p)
    if not sol.regime.is_hybrid:
        return sol.regime.value, "", NAN, NAN, NAN, NAN, NAN, NAN
    eff = classify_t1_t2(p, sol)
    h, o = sol.chosen, sol.system_o.channel
    return (sol.regime.value, eff.label, o.price, o.lead_time, h.ondemand.price,
            h.ondemand.lead_time, h.standard.price, h.standard.lead_time)


def _fig4(res, jobs):
    spec = regime_grid(res, res)
    pts = spec.points()
    vals = parallel_map(_fig4_cell, [spec.apply(MarketParams(), pt) for pt in pts], jobs)
    cols = ("ws", "K", "regime", "t_class")
    rows = [(w, K, v[0], v[1]) for (K, w), v in zip(pts, vals)]
    ws = np.linspace(1.0 / res, 1.0, res)
    line = parallel_map(_fig4_cell, [MarketParams(K=50.0, w_s=float(w)) for w in ws], jobs)
    lcols = ("ws", "regime", "t_class", "p_o_O", "W_o_O", "p_o_H", "W_o_H", "p_s_H", "W_s_H")
    lrows = [(float(w),) + tuple(v) for w, v in zip(ws, line)]
    return {"fig4_sets": (cols, rows), "fig4_K50": (lcols, lrows)}


def _fig5_cell(p):
    sol = solve_deployment(p)
    pv = proliferation_value(p, sol, check=False)
    return sol.regime.value, pv.delta_o, pv.delta_s, pv.bound_o, pv.bound_s


def _fig5(res, jobs):
    base = MarketParams()
    cases = [("ws", float(w), base.with_(w_s=float(w))) for w in np.linspace(1.0 / res, 1.0, res)]
    cases += [("K", float(K), base.with_(K=float(K))) for K in np.linspace(10.0, 100.0, res)]
    vals = parallel_map(_fig5_cell, [c[2] for c in cases], jobs)
    cols = ("axis", "value", "regime", "delta_o", "delta_s", "bound_o", "bound_s")
    return {"fig5": (cols, [(a, x) + tuple(v) for (a, x, _), v in zip(cases, vals)])}


def _figA1(res):
    """Hybrid regions in (lambda_o, W_o) at the base point, with both branch profiles."""
    p = MarketParams()
    lo = np.linspace(p.Lambda / res, p.Lambda * (1.0 - 1.0 / res), res)
    ol_v, ol_W, _ = ol_profile(lo, p)
    sl_v, sl_W, _ = sl_profile(lo, p)
    cols = ("lambda_o", "W_o_boundary", "W_o_ol_foc", "W_o_sl_foc", "W_s_ol", "W_s_sl",
            "W_o_ol", "W_o_sl", "pi_ol", "pi_sl")
    rows = []
    for i, l in enumerate(lo):
        l = float(l)
        rows.append((l, region_boundary(l, p), wo_interior_ol(l, p), wo_interior_sl(l, p),
                     ws_given_ol(l, p), ws_given_sl(l, p), ol_W[i], sl_W[i], ol_v[i], sl_v[i]))
    return {"figA1": (cols, rows)}


def _figMMk(res, jobs):
    out = {}
    ext = ExtensionConfig(queue_model=MMK)
    rmap = regime_map_general(MarketParams(), ext, regime_grid(res, res), jobs=jobs, check=False)
    out["figMMk_map"] = (REGIME_COLUMNS, regime_rows(rmap))
    ws = np.linspace(1.0 / res, 1.0, res)
    cells = parallel_map(sweep_cell, [(MarketParams(w_s=float(w)), ext) for w in ws], jobs)
    out["figMMk_values"] = (("ws", "delta_o", "delta_s"),
                            [(float(w), c[1], c[2]) for w, c in zip(ws, cells)])
    return out


FIGURE_RES = {"fig1": 41, "fig2": 48, "fig3": 64, "fig4": 48, "fig5": 32, "figA1": 60,
              "figMMk": 12}


def reproduce(fig, res=None, jobs=1):
    """{file stem: (columns, rows)} for one figure."""
    if fig not in FIGURES:
        raise InvalidInput(f"unknown figure {fig!r}; choose from {FIGURES}")
    res = int(res or FIGURE_RES[fig])
    if res < 4:
        raise InvalidInput("figure resolution must be at least 4")
    if fig == "fig1":
        return _fig1(res)
    if fig == "figA1":
        return _figA1(res)
    return {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5,
            "figMMk": _figMMk}[fig](res, jobs)


# ---------------------------------------------------------------------------
# validation suite

def sample_instances(n, seed):
    """Random market instances: V in [1.7, 2.5], Lambda in [25, 35], w_s in (0, 1], K in [10, 100]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        V, lam, u, K = rng.uniform(1.7, 2.5), rng.uniform(25, 35), rng.random(), rng.uniform(10, 100)
        out.append(MarketParams(V=float(V), Lambda=float(lam), w_s=float(1.0 - u), K=float(K)))
    return out


@dataclass
class CheckResult:
    name: str
    observed: float
    tolerance: float
    passed: bool
    detail: str = ""


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-12)


DES_POINTS = ((1, 1.0, 0.5), (2, 1.0, 1.0), (10, 1.0, 8.0))


def validation_suite(draws=3, seed=12345, services=1_000_000, flex_grid=16, flex_draws=1):
    """Oracle, simulation and flexible-server checks; returns a list of CheckResult."""
    results = []
    for i, p in enumerate(sample_instances(draws, seed)):
        sol = solve_deployment(p)
        s = brute_force_single_s(p)[0]
        o = brute_force_single_o(p)[0]
        h = brute_force_hybrid(p).overall
        for tag, mine, ref in (("S", sol.pi_s, s), ("O", sol.pi_o, o), ("deploy", sol.pi_star, h)):
            g = _rel(mine, ref) if ref > 0 else abs(mine - ref)
            results.append(CheckResult(f"oracle_{tag}[{i}]", g, 5e-3, g <= 5e-3))
    sim = SimConfig(horizon_services=services, seed=seed)
    for k, mu, lam in DES_POINTS:
        ref = lead_time_mm1(k, mu, lam) if k == 1 else lead_time_mmk(k, mu, lam)
        m, _ = simulate_queue(k, mu, lam, sim)
        g = _rel(m, ref)
        results.append(CheckResult(f"des_k{k}_lam{lam:g}", g, 0.02, g <= 0.02))
    p = MarketParams()
    sol = solve_deployment(p)
    pol = sol.channels()
    mc = simulate_market(pol, p, SimConfig(horizon_services=max(10_000, services // 10), seed=seed))
    ls, lo = analytic_shares(pol, p)
    for tag, got, se, ref in (("s", mc.lambda_s, mc.se_lambda_s, ls),
                              ("o", mc.lambda_o, mc.se_lambda_o, lo)):
        z = abs(got - ref) / se if se > 0 else (0.0 if got == ref else math.inf)
        results.append(CheckResult(f"market_share_{tag}", z, 3.0, z <= 3.0, "z-score"))
    for i, q in enumerate(sample_instances(flex_draws, seed + 1)):
        chk = flexible_equivalence_check(q, grid_n=flex_grid)
        results.append(CheckResult(f"flexible[{i}]", chk.max_gap, chk.tolerance, chk.passed,
                                   "max pi_f - pi*"))
    return results


def validation_table(results):
    cols = ("check", "observed", "tolerance", "status")
    rows = [(r.name, r.observed, r.tolerance, "pass" if r.passed else "FAIL") for r in results]
    return table_text(cols, rows, "table")
