"""Space-time error measures and experimental orders of convergence."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .. import nfunction
from ..assembly import assembler
from ..manufactured import exact_pressure, exact_velocity, exact_velocity_gradient
from ..quadrature import gauss_interval

__all__ = ["ErrorSet", "compute_errors", "compute_eoc"]

TIME_POINTS = 3


class ErrorSet(NamedTuple):
    err_v: float
    err_q_l2: float
    err_q_lpprime: float
    err_v_linf: float = float("nan")


def compute_errors(states: Sequence, case, grid, fe) -> ErrorSet:
    """Errors of a discrete trajectory against the exact solution of ``case``.

    ``err_v`` compares the piecewise-constant discrete velocity on each
    interval with the exact velocity at the right end point, in
    ``L^2(L^2)`` plus the ``L^2(L^2)`` norm of the ``F`` difference.
    Pressure errors compare with ``q(t)`` at 3 Gauss points per interval in
    ``L^r(L^r)``, ``r = 2`` and ``r = p'``.  ``err_v_linf`` is the maximum over
    the nodes of the spatial ``L^2`` velocity error.
    """
    if len(states) != grid.M:
        raise ValueError(f"expected {grid.M} states, got {len(states)}")
    params = case.params
    asm = assembler(fe)
    pts, w = asm.points, asm.weights
    tau = grid.tau
    rp = params.p_conj
    rule = gauss_interval(TIME_POINTS)
    nodes = grid.nodes

    sum_v = sum_F = 0.0
    sum_q2 = sum_qp = 0.0
    linf = 0.0
    for m, state in enumerate(states, start=1):
        t = nodes[m]
        vh, gh = asm.velocity_at(state.v)
        dv = vh - exact_velocity(case, t, pts)
        l2 = float(w @ np.sum(dv * dv, axis=1))
        sum_v += tau * l2
        linf = max(linf, math.sqrt(l2))
        Fh = nfunction.f_map(params, nfunction.sym(gh))
        Fe = nfunction.f_map(params, nfunction.sym(exact_velocity_gradient(case, t, pts)))
        sum_F += tau * float(w @ np.sum((Fh - Fe) ** 2, axis=(1, 2)))

        qh = asm.pressure_at(state.q)
        for s, ws in zip(rule.points, rule.weights):
            dq = np.abs(exact_pressure(case, nodes[m - 1] + s * tau, pts) - qh)
            sum_q2 += tau * ws * float(w @ dq**2)
            sum_qp += tau * ws * float(w @ dq**rp)

    return ErrorSet(
        err_v=math.sqrt(sum_v) + math.sqrt(sum_F),
        err_q_l2=math.sqrt(sum_q2),
        err_q_lpprime=sum_qp ** (1.0 / rp),
        err_v_linf=linf,
    )


def compute_eoc(err_i, err_next, tau_i, tau_next, h_i, h_next) -> float:
    """``log(err_next / err_i) / log((tau_next + h_next) / (tau_i + h_i))``."""
    if not (err_i > 0 and err_next > 0):
        raise ValueError("errors must be positive")
    return math.log(err_next / err_i) / math.log((tau_next + h_next) / (tau_i + h_i))
