"""Command line: gigdeploy {solve, regime-map, sweep, validate, reproduce}.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 validation failure.
"""
import argparse
import json
import os
import sys
import traceback

from . import experiments as ex
from .errors import GigDeployError, InvalidInput

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_VALIDATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInput(message)


def _common(sub):
    g = sub.add_argument_group("market and run options")
    g.add_argument("--config", help="flat JSON file with RunConfig fields; flags override it")
    g.add_argument("--ws", type=float, dest="w_s", help="employee hourly wage")
    g.add_argument("--K", type=float, dest="K", help="contractor supply pool")
    g.add_argument("--V", type=float, dest="V", help="service value")
    g.add_argument("--Lambda", "--lambda", type=float, dest="Lambda", help="arrival rate")
    g.add_argument("--mu-s", type=float, dest="mu_s")
    g.add_argument("--mu-o", type=float, dest="mu_o")
    g.add_argument("--alpha", type=float, help="on-demand quality ratio")
    g.add_argument("--queue-model", dest="queue_model", help="MM1 or MMk")
    g.add_argument("--theta-dist", dest="theta_dist", help="uniform or beta:a,b")
    g.add_argument("--r-dist", dest="r_dist", help="uniform or beta:a,b")
    g.add_argument("--sweep", action="append", help="axis as name:lo:hi:n (repeatable)")
    g.add_argument("--out", dest="output_path", help="output file (directory for reproduce)")
    g.add_argument("--format", choices=ex.FORMATS)
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int, help="worker processes (default $GIGDEPLOY_JOBS or 1)")


def build_parser():
    ap = _Parser(prog="gigdeploy", description="Deployment, pricing and staffing of an "
                 "on-demand service platform with employees and contractors.")
    subs = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = subs.add_parser("solve", help="optimal deployment and welfare at one parameter point")
    _common(s)
    s = subs.add_parser("regime-map", help="regime over a (ws, K) grid, CSV")
    _common(s)
    s = subs.add_parser("sweep", help="profit ratio, proliferation values and thresholds, CSV")
    _common(s)
    s = subs.add_parser("validate", help="oracle, simulation and flexible-server checks")
    _common(s)
    s.add_argument("--draws", type=int, default=3, help="random draws for the oracle checks")
    s.add_argument("--services", type=int, default=1_000_000, help="simulated services per point")
    s.add_argument("--flex-grid", type=int, default=16)
    s.add_argument("--flex-draws", type=int, default=1)
    s = subs.add_parser("reproduce", help="data series behind a figure")
    s.add_argument("figure", choices=ex.FIGURES)
    s.add_argument("--resolution", type=int, help="grid points per axis")
    _common(s)
    return ap


CONFIG_FIELDS = ("w_s", "K", "V", "Lambda", "mu_s", "mu_o", "alpha", "queue_model",
                 "theta_dist", "r_dist", "sweep", "output_path", "format", "seed", "jobs")


def config_from_args(args):
    values = ex.load_config_file(args.config) if args.config else {}
    for k in CONFIG_FIELDS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    return ex.build_config(values)


def _cmd_solve(args, cfg):
    rep = ex.solve_report(cfg)
    if cfg.format == "table":
        text = ex.report_table(rep)
    else:
        text = json.dumps(ex.json_safe(rep), indent=1) + "\n"
    ex.emit(text, cfg.output_path)
    return EXIT_OK


def _cmd_regime_map(args, cfg):
    rmap = ex.regime_map(cfg)
    ex.emit(ex.table_text(ex.REGIME_COLUMNS, ex.regime_rows(rmap), cfg.format), cfg.output_path)
    return EXIT_OK


def _cmd_sweep(args, cfg):
    cols, rows = ex.run_sweep(cfg)
    ex.emit(ex.table_text(cols, rows, cfg.format), cfg.output_path)
    return EXIT_OK


def _cmd_validate(args, cfg):
    if min(args.draws, args.flex_draws) < 0:
        raise InvalidInput("draw counts must be nonnegative")
    res = ex.validation_suite(args.draws, cfg.seed, args.services, args.flex_grid,
                              args.flex_draws)
    ex.emit(ex.validation_table(res), cfg.output_path)
    return EXIT_OK if all(r.passed for r in res) else EXIT_VALIDATION


def _cmd_reproduce(args, cfg):
    parts = ex.reproduce(args.figure, args.resolution, cfg.jobs)
    out_dir = cfg.output_path or "figures"
    os.makedirs(out_dir, exist_ok=True)
    for stem, (cols, rows) in parts.items():
        path = os.path.join(out_dir, f"{stem}.csv")
        ex.emit(ex.csv_text(cols, rows), path)
        print(path)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "regime-map": _cmd_regime_map, "sweep": _cmd_sweep,
            "validate": _cmd_validate, "reproduce": _cmd_reproduce}


def _fail(code, kind, message):
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        if args.command == "solve" and args.format is None and "format" not in (
                ex.load_config_file(args.config) if args.config else {}):
            cfg = ex.RunConfig(cfg.params, cfg.extension, cfg.sweep, cfg.output_path, "json",
                               cfg.seed, cfg.jobs)
        return COMMANDS[args.command](args, cfg)
    except InvalidInput as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except GigDeployError as exc:
        if isinstance(exc, ValueError):
            return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
        traceback.print_exc()
        return _fail(EXIT_INTERNAL, type(exc).__name__, str(exc))
    except SystemExit as exc:
        # --help exits 0 through argparse
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 1
        traceback.print_exc()
        return _fail(EXIT_INTERNAL, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
