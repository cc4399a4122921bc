"""Command-line interface: ``pstokes eoc | stab | solve``.

Exit codes: 0 success, 2 solver failure, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from ..solver import NewtonDivergedError, SingularSystemError
from .config import ConfigError, StudyConfig, load_config
from .study import EOC_COLUMNS, parse_r_list, run_eoc, run_level, run_stab

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pstokes", description="Unsteady p-Stokes finite element studies.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    eoc = sub.add_parser("eoc", help="convergence study on the manufactured solution")
    eoc.add_argument("--config", help="flat key = value file; flags override it")
    eoc.add_argument("--p", type=float)
    eoc.add_argument("--alpha", type=float)
    eoc.add_argument("--bc", choices=["strong", "weak"])
    eoc.add_argument("--levels", help="level range, e.g. 1..5")
    eoc.add_argument("--nu0", type=float)
    eoc.add_argument("--delta", type=float)
    eoc.add_argument("--cq", type=float)
    eoc.add_argument("--T", type=float)
    eoc.add_argument("--tol-abs", dest="tol_abs", type=float)
    eoc.add_argument("--tol-rel", dest="tol_rel", type=float)
    eoc.add_argument("--out")
    eoc.add_argument("--plot", action="store_true", default=None)
    eoc.add_argument("--stats", dest="stats", action="store_true", default=None,
                     help="write per-step Newton statistics")

    stab = sub.add_parser("stab", help="L^r stability constants of the discrete Leray projection")
    stab.add_argument("--bc", choices=["strong", "weak"], default="strong")
    stab.add_argument("--imax", type=int, default=16)
    stab.add_argument("--i", dest="indices", help="comma-separated mesh indices (overrides --imax)")
    stab.add_argument("--r", default="2,p,pprime")
    stab.add_argument("--p", type=float, default=1.5)
    stab.add_argument("--out", default=".")
    stab.add_argument("--plot", action="store_true")

    solve = sub.add_parser("solve", help="one run on the finest level of a config file")
    solve.add_argument("--config", required=True)
    return parser


def _eoc_config(args) -> StudyConfig:
    base = load_config(args.config) if args.config else StudyConfig()
    changes = {k: getattr(args, k) for k in
               ("p", "alpha", "bc", "levels", "nu0", "delta", "cq", "T", "tol_abs", "tol_rel",
                "out", "plot")
               if getattr(args, k) is not None}
    if args.stats is not None:
        changes["verbose"] = args.stats
    if "p" in changes and args.cq is None and not args.config:
        changes["cq"] = None
    return base.with_(**changes) if changes else base


def _cmd_eoc(args) -> int:
    config = _eoc_config(args)
    rows = run_eoc(config)
    print(",".join(EOC_COLUMNS))
    for r in rows:
        print(",".join("" if v is None else f"{v:.6g}" for v in
                       (r.i, r.h, r.tau, r.err_v, r.eoc_v, r.err_q_lpprime, r.eoc_q_lpprime,
                        r.err_q_l2, r.eoc_q_l2)))
    return EXIT_OK


def _cmd_stab(args) -> int:
    if args.indices:
        try:
            indices = [int(s) for s in args.indices.split(",")]
        except ValueError:
            raise ConfigError(f"bad index list {args.indices!r}") from None
    else:
        indices = range(1, args.imax + 1)
    if any(i < 1 for i in indices):
        raise ConfigError("mesh indices must be positive")
    if not args.p > 1:
        raise ConfigError("p must exceed 1")
    rows = run_stab(args.bc, indices, parse_r_list(args.r, args.p), out=args.out, plot=args.plot)
    for i, r, proj, value in rows:
        print(f"{i},{r:g},{proj},{value:.6f}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    config = load_config(args.config)
    os.makedirs(config.out, exist_ok=True)
    i = config.levels[1]
    row = run_level(config, i, stats_path=os.path.join(config.out, "solver_stats.csv"))
    with open(os.path.join(config.out, "errors.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "h", "tau", "err_v", "err_q_lpprime", "err_q_l2", "err_v_linf"])
        w.writerow([i, f"{row.h:.10e}", f"{row.tau:.10e}", f"{row.err_v:.10e}",
                    f"{row.err_q_lpprime:.10e}", f"{row.err_q_l2:.10e}", f"{row.err_v_linf:.10e}"])
    print(f"level {i}: err_v={row.err_v:.4e} err_q_lpprime={row.err_q_lpprime:.4e} "
          f"err_q_l2={row.err_q_l2:.4e} newton_max={row.newton_max}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"eoc": _cmd_eoc, "stab": _cmd_stab, "solve": _cmd_solve}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"pstokes: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonDivergedError, SingularSystemError) as exc:
        print(f"pstokes: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
