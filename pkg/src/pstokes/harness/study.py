"""Convergence-rate and projection-stability studies."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..leray import LerayOperators, stability_constants
from ..manufactured import ManufacturedCase
from ..mesh import Triangulation, build_square_mesh, refine_uniform
from ..nfunction import PowerLawParams
from ..solver import NewtonDivergedError, SingularSystemError, TimeGrid, time_march, write_solver_stats
from ..spaces import build_fe_system
from .config import ConfigError, StudyConfig
from .errors import compute_eoc, compute_errors
from .svg import write_line_plot

__all__ = [
    "EocRow",
    "theory_rates",
    "level_mesh",
    "run_level",
    "run_eoc",
    "write_eoc_csv",
    "parse_r_list",
    "run_stab",
    "EOC_COLUMNS",
    "STAB_COLUMNS",
]

log = logging.getLogger(__name__)

EOC_COLUMNS = ["i", "h", "tau", "err_v", "eoc_v", "err_q_lpprime", "eoc_q_lpprime",
               "err_q_l2", "eoc_q_l2"]
DIAG_COLUMNS = ["i", "err_v_linf", "newton_max", "newton_total", "seconds"]
STAB_COLUMNS = ["i", "r", "proj", "value"]


@dataclass
class EocRow:
    """Errors on level ``i``; ``eoc_*`` compare level ``i`` with ``i + 1``."""

    i: int
    h: float
    tau: float
    err_v: float
    err_q_lpprime: float
    err_q_l2: float
    eoc_v: Optional[float] = None
    eoc_q_lpprime: Optional[float] = None
    eoc_q_l2: Optional[float] = None
    err_v_linf: float = float("nan")
    newton_max: int = 0
    newton_total: int = 0
    seconds: float = 0.0


def theory_rates(p: float, alpha: float) -> dict:
    """Predicted rates: velocity ``alpha min(1, p'/2)``, pressure in ``L^p'``
    that rate times ``min(1, 2/p')``, pressure in ``L^2`` ``alpha`` for
    ``p <= 2`` (no prediction otherwise)."""
    pc = p / (p - 1.0)
    v = alpha * min(1.0, pc / 2.0)
    return {
        "eoc_v": v,
        "eoc_q_lpprime": v * min(1.0, 2.0 / pc),
        "eoc_q_l2": alpha if p <= 2 else None,
    }


def level_mesh(i: int) -> Triangulation:
    """``i``-fold uniform refinement of the two-triangle mesh."""
    mesh = build_square_mesh(1)
    for _ in range(i):
        mesh = refine_uniform(mesh)
    return mesh


def _case(config: StudyConfig) -> ManufacturedCase:
    params = PowerLawParams(nu0=config.nu0, delta=config.delta, p=config.p)
    return ManufacturedCase(params, alpha=config.alpha, c_q=config.cq, T=config.T)


def run_level(config: StudyConfig, i: int, mesh: Optional[Triangulation] = None,
              stats_path=None) -> EocRow:
    """Solve the manufactured problem on level ``i`` and measure the errors."""
    case = _case(config)
    mesh = level_mesh(i) if mesh is None else mesh
    fe = build_fe_system(mesh, config.bc, case.normal_data, inhomogeneous=True)
    grid = TimeGrid.for_level(config.T, i)
    t0 = time.perf_counter()
    try:
        states = time_march(fe, case.params, grid, case, tol_abs=config.tol_abs,
                            tol_rel=config.tol_rel)
    except NewtonDivergedError as exc:
        raise NewtonDivergedError(f"level {i}: {exc}") from exc
    except SingularSystemError as exc:
        raise SingularSystemError(f"level {i}: {exc}") from exc
    if stats_path is not None:
        write_solver_stats(states, stats_path)
    err = compute_errors(states, case, grid, fe)
    its = [s.newton_iterations for s in states]
    return EocRow(
        i=i, h=mesh.h, tau=grid.tau, err_v=err.err_v, err_q_lpprime=err.err_q_lpprime,
        err_q_l2=err.err_q_l2, err_v_linf=err.err_v_linf, newton_max=max(its),
        newton_total=sum(its), seconds=time.perf_counter() - t0,
    )


def fill_eocs(rows: Sequence[EocRow]) -> None:
    for a, b in zip(rows[:-1], rows[1:]):
        a.eoc_v = compute_eoc(a.err_v, b.err_v, a.tau, b.tau, a.h, b.h)
        a.eoc_q_lpprime = compute_eoc(a.err_q_lpprime, b.err_q_lpprime, a.tau, b.tau, a.h, b.h)
        a.eoc_q_l2 = compute_eoc(a.err_q_l2, b.err_q_l2, a.tau, b.tau, a.h, b.h)


def _fmt(x, spec):
    return "" if x is None else format(x, spec)


def write_eoc_csv(rows: Sequence[EocRow], path, theory: Optional[dict] = None) -> None:
    """``eoc.csv``; a final ``theory`` row carries the predicted rates."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EOC_COLUMNS)
        for r in rows:
            w.writerow([r.i, _fmt(r.h, ".10e"), _fmt(r.tau, ".10e"),
                        _fmt(r.err_v, ".10e"), _fmt(r.eoc_v, ".6f"),
                        _fmt(r.err_q_lpprime, ".10e"), _fmt(r.eoc_q_lpprime, ".6f"),
                        _fmt(r.err_q_l2, ".10e"), _fmt(r.eoc_q_l2, ".6f")])
        if theory is not None:
            w.writerow(["theory", "", "", "", _fmt(theory["eoc_v"], ".6f"), "",
                        _fmt(theory["eoc_q_lpprime"], ".6f"), "", _fmt(theory["eoc_q_l2"], ".6f")])


def _write_diagnostics(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for r in rows:
            w.writerow([r.i, _fmt(r.err_v_linf, ".10e"), r.newton_max, r.newton_total,
                        _fmt(r.seconds, ".2f")])


def run_eoc(config: StudyConfig, write: bool = True) -> List[EocRow]:
    """Run all levels of ``config``; write ``eoc.csv`` (plus diagnostics and an
    optional ``eoc.svg``) to ``config.out``."""
    if write:
        os.makedirs(config.out, exist_ok=True)
    rows = []
    mesh = level_mesh(config.levels[0])
    for i in config.level_range:
        stats = os.path.join(config.out, f"solver_stats_{i}.csv") if (write and config.verbose) else None
        row = run_level(config, i, mesh, stats)
        log.info("level %d: h=%.4g tau=%.4g err_v=%.4e err_q_lp'=%.4e err_q_l2=%.4e (%.1fs)",
                 i, row.h, row.tau, row.err_v, row.err_q_lpprime, row.err_q_l2, row.seconds)
        rows.append(row)
        mesh = refine_uniform(mesh)
    fill_eocs(rows)
    if write:
        write_eoc_csv(rows, os.path.join(config.out, "eoc.csv"), theory_rates(config.p, config.alpha))
        _write_diagnostics(rows, os.path.join(config.out, "eoc_diagnostics.csv"))
        if config.plot:
            x = [r.h + r.tau for r in rows]
            write_line_plot(
                os.path.join(config.out, "eoc.svg"),
                {"err_v": (x, [r.err_v for r in rows]),
                 "err_q L^p'": (x, [r.err_q_lpprime for r in rows]),
                 "err_q L^2": (x, [r.err_q_l2 for r in rows])},
                title=f"p={config.p}, alpha={config.alpha}, {config.bc}",
                xlabel="h + tau", ylabel="error",
            )
    return rows


def parse_r_list(text, p: float) -> List[float]:
    """``"2,p,pprime"`` -> ``[2.0, p, p/(p-1)]``."""
    out = []
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    for item in items:
        s = str(item).strip().lower()
        if s == "p":
            out.append(float(p))
        elif s in {"pprime", "p'", "pconj"}:
            out.append(p / (p - 1.0))
        else:
            try:
                out.append(float(s))
            except ValueError:
                raise ConfigError(f"bad exponent {item!r}") from None
        if not out[-1] >= 1:
            raise ConfigError(f"exponent must be >= 1, got {out[-1]}")
    return out


def run_stab(bc="strong", indices: Iterable[int] = range(1, 17), r_list=(2.0, 1.5, 3.0),
             out: Optional[str] = None, plot: bool = False) -> List[tuple]:
    """``c_stab`` of ``P_h`` and ``P_h^perp`` on the ``n = i`` square meshes.

    Returns rows ``(i, r, proj, value)``; with ``out`` set, writes
    ``stab.csv`` (and ``stab.svg`` if ``plot``).
    """
    rows = []
    r_list = [float(r) for r in r_list]
    for i in indices:
        fe = build_fe_system(build_square_mesh(int(i)), bc)
        consts = stability_constants(LerayOperators(fe), r_list)
        for r in r_list:
            for proj in ("P_h", "P_h_perp"):
                rows.append((int(i), r, proj, consts[(r, proj)]))
        log.info("stab %s i=%d: %s", bc, i, {k: round(v, 4) for k, v in consts.items()})
    if out is not None:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "stab.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STAB_COLUMNS)
            for i, r, proj, value in rows:
                w.writerow([i, f"{r:.6g}", proj, f"{value:.10f}"])
        if plot:
            series = {}
            for i, r, proj, value in rows:
                xs, ys = series.setdefault(f"{proj} r={r:g}", ([], []))
                xs.append(i)
                ys.append(value)
            write_line_plot(os.path.join(out, "stab.svg"), series, title=f"c_stab ({bc})",
                            xlabel="i", ylabel="c_stab", logx=False, logy=False)
    return rows
