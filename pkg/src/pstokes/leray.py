"""Discrete Leray projection toolkit.

Spaces (homogeneous impermeability):

* ``V_h``: velocities with ``v . n = 0``; constrained DOFs removed in strong
  mode, ``T v = 0`` imposed by a multiplier in weak mode.
* ``Q_h``: zero-mean P1 pressures.
* ``V_h,div``: ``v in V_h`` with ``(eta, div v) = 0`` for every P1 ``eta``.

``P_h`` is the L2-orthogonal projection onto ``V_h,div``, computed from one
bordered saddle-point factorization.  The gradient / divergence / inverse
Neumann operators give an independent route to the same projection,
``P_h = Id - grad^h (Delta_N^h)^{-1} div^h`` on ``V_h``.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .assembly import assembler
from .mesh import build_square_mesh
from .solver import SingularSystemError, factorize_saddle
from .spaces import BCMode, FeSystem, build_fe_system

__all__ = [
    "LerayOperators",
    "discrete_gradient",
    "discrete_divergence",
    "discrete_inverse_neumann",
    "leray_project",
    "leray_complement",
    "project_unconstrained",
    "stability_constants",
    "operator_convergence_probe",
    "lr_norm",
]

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1.0e-13


def _factorize(K, what, dense_border=False):
    try:
        return factorize_saddle(K, dense_border)
    except SingularSystemError as exc:
        raise SingularSystemError(f"{exc} ({what})") from exc


class LerayOperators:
    """Factorized systems for the discrete Leray toolkit on one FE system.

    Parameters
    ----------
    fe : FeSystem
        Any boundary data attached to ``fe`` is ignored; the operators act
        on the homogeneous spaces.
    """

    def __init__(self, fe: FeSystem):
        self.fe = fe
        self.asm = asm = assembler(fe)
        self.M = asm.mass()
        self.B = asm.divergence()
        self.T = asm.normal_trace()
        self.Mq = asm.pressure_mass()
        self.c = asm.pressure_integrals()
        self.free = fe.free_dofs
        self.weak = fe.bc_mode is BCMode.WEAK

        f = self.free
        nf, nq, nl = len(f), fe.n_q, fe.n_lam
        M_ff = self.M[f][:, f]
        B_f = self.B[:, f]
        T_f = self.T[:, f]
        c = sp.csr_matrix(self.c.reshape(-1, 1))

        # mass on V_h
        if self.weak:
            K_V = sp.bmat([[M_ff, T_f.T], [T_f, None]])
        else:
            K_V = M_ff
        self._lu_V = _factorize(K_V, "velocity mass")

        # orthogonal projection onto V_h,div
        rows = [[M_ff, B_f.T, T_f.T if self.weak else None, None],
                [B_f, None, None, c],
                [T_f if self.weak else None, None, None, None],
                [None, c.T, None, None]]
        if not self.weak:
            rows = [[r[0], r[1], r[3]] for r in (rows[0], rows[1], rows[3])]
        self._lu_P = _factorize(sp.bmat(rows), "leray projection", dense_border=True)

        # zero-mean pressure mass
        self._lu_Q = _factorize(sp.bmat([[self.Mq, c], [c.T, None]]), "pressure mass")
        self._nf, self._nq, self._nl = nf, nq, nl
        self._grad_basis = None
        self._lu_G = None

    # -- helpers ------------------------------------------------------------
    def _expand(self, w_free):
        w_free = np.asarray(w_free)
        out = np.zeros((self.fe.n_v,) + w_free.shape[1:])
        out[self.free] = w_free
        return out

    def _solve_V(self, load):
        """``V_h``-representer of the functional with coefficient vector ``load``."""
        load = np.asarray(load, dtype=float)
        rhs = load[self.free]
        if self.weak:
            pad = np.zeros((self._nl,) + rhs.shape[1:])
            rhs = np.concatenate([rhs, pad])
        x = self._lu_V.solve(rhs)
        return self._expand(x[: self._nf])

    def load_of(self, u):
        """``(u, phi_i)`` for coefficients ``u`` (shape ``(n_v,)`` or ``(n_v, k)``),
        point values ``(N, 2)`` at the quadrature points, or a callable ``u(x)``."""
        if callable(u):
            u = u(self.asm.points)
        u = np.asarray(u, dtype=float)
        if u.shape == (len(self.asm.points), 2):
            return self.asm.load(f=u)
        if u.shape[0] == self.fe.n_v and u.ndim <= 2:
            return self.M @ u
        raise ValueError(f"cannot interpret input of shape {u.shape} as a velocity")

    def gradient_basis(self):
        """Columns ``grad^h psi_k`` for every pressure basis function."""
        if self._grad_basis is None:
            self._grad_basis = self._solve_V(-self.B.T.toarray())
        return self._grad_basis

    def gram(self):
        """``G_kl = (grad^h psi_k, grad^h psi_l)``."""
        Gb = self.gradient_basis()
        return Gb.T @ (self.M @ Gb)

    def _inverse_neumann_lu(self):
        if self._lu_G is None:
            G = self.gram()
            c = self.c.reshape(-1, 1)
            K = np.block([[G, c], [c.T, np.zeros((1, 1))]])
            self._lu_G = _factorize(sp.csc_matrix(K), "inverse Neumann")
        return self._lu_G


def discrete_gradient(ops: LerayOperators, q) -> np.ndarray:
    """``grad^h q in V_h`` with ``(grad^h q, v) = -(q, div v)`` for all ``v in V_h``."""
    return ops._solve_V(-(ops.B.T @ np.asarray(q, dtype=float)))


def discrete_divergence(ops: LerayOperators, u) -> np.ndarray:
    """``div^h u in Q_h`` with ``(div^h u, q) = -(u, grad^h q)`` for all ``q in Q_h``.

    Since ``grad^h q`` lies in ``V_h`` only the ``V_h`` projection of ``u``
    matters, and ``-(P_V u, grad^h q) = (q, div P_V u)``.
    """
    w = ops._solve_V(ops.load_of(u))
    rhs = np.concatenate([ops.B @ w, [0.0]])
    return ops._lu_Q.solve(rhs)[: ops._nq]


def discrete_inverse_neumann(ops: LerayOperators, q) -> np.ndarray:
    """``x in Q_h`` with ``(grad^h x, grad^h q_h) = -(q, q_h)`` for all ``q_h in Q_h``."""
    rhs = np.concatenate([-(ops.Mq @ np.asarray(q, dtype=float)), [0.0]])
    return ops._inverse_neumann_lu().solve(rhs)[: ops._nq]


def project_unconstrained(ops: LerayOperators, u) -> np.ndarray:
    """L2-orthogonal projection ``P_V`` onto ``V_h``."""
    return ops._solve_V(ops.load_of(u))


def leray_project(ops: LerayOperators, u) -> np.ndarray:
    """L2-orthogonal projection ``P_h`` onto ``V_h,div``.

    ``u`` may be velocity coefficients (a function of the full P2 space),
    point values at the quadrature points, or a callable.
    """
    load = ops.load_of(u)
    rhs = load[ops.free]
    pad = np.zeros((ops._nq + ops._nl + 1,) + rhs.shape[1:])
    x = ops._lu_P.solve(np.concatenate([rhs, pad]))
    return ops._expand(x[: ops._nf])


def leray_complement(ops: LerayOperators, u) -> np.ndarray:
    """``u - P_h u``; point-value or callable input is first mapped by ``P_V``."""
    arr = None if callable(u) else np.asarray(u, dtype=float)
    if arr is not None and arr.shape[0] == ops.fe.n_v and arr.ndim == 1:
        return arr - leray_project(ops, arr)
    w = project_unconstrained(ops, u)
    return w - leray_project(ops, w)


def representation_projection(ops: LerayOperators, u) -> np.ndarray:
    """``u - grad^h (Delta_N^h)^{-1} div^h u``, equal to ``P_h u`` on ``V_h``."""
    x = discrete_inverse_neumann(ops, discrete_divergence(ops, u))
    return np.asarray(u, dtype=float) - discrete_gradient(ops, x)


__all__.append("representation_projection")


def lr_norm(values, weights, r: float) -> float:
    """``(sum_n w_n |u_n|^r)^(1/r)`` for point values ``(N,)`` or ``(N, 2)``."""
    values = np.asarray(values, dtype=float)
    mag = np.abs(values) if values.ndim == 1 else np.linalg.norm(values, axis=1)
    return float(np.dot(weights, mag**r)) ** (1.0 / r)


def _lr_norms_columns(ex, ey, W, weights, r):
    vx = ex @ W
    vy = ey @ W
    mag = np.sqrt(vx * vx + vy * vy)
    return (weights @ mag**r) ** (1.0 / r)


def stability_constants(ops: LerayOperators, r_list: Iterable[float], chunk: int = 256) -> dict:
    """Empirical ``L^r`` operator norms of ``P_h`` and ``P_h^perp``.

    For every velocity basis function ``phi_j`` the ratios
    ``|J P_V phi_j|_r / |P_V phi_j|_r`` are formed for ``J = P_h`` and
    ``J = Id - P_h``; the maxima over ``j`` are returned as
    ``{(r, "P_h"): value, (r, "P_h_perp"): value}``.  Basis functions with
    ``|P_V phi_j|_r <= 1e-13`` are skipped.
    """
    r_list = [float(r) for r in r_list]
    ex, ey = ops.asm.velocity_basis_matrix()
    w = ops.asm.weights
    n_v = ops.fe.n_v
    best = {(r, j): 0.0 for r in r_list for j in ("P_h", "P_h_perp")}
    skipped = 0
    for start in range(0, n_v, chunk):
        idx = np.arange(start, min(start + chunk, n_v))
        E = np.zeros((n_v, len(idx)))
        E[idx, np.arange(len(idx))] = 1.0
        PV = project_unconstrained(ops, E)
        PH = leray_project(ops, PV)
        for r in r_list:
            den = _lr_norms_columns(ex, ey, PV, w, r)
            ok = den > DEGENERATE_NORM
            skipped += int(np.count_nonzero(~ok))
            num_p = _lr_norms_columns(ex, ey, PH[:, ok], w, r)
            num_c = _lr_norms_columns(ex, ey, PV[:, ok] - PH[:, ok], w, r)
            if ok.any():
                best[(r, "P_h")] = max(best[(r, "P_h")], float(np.max(num_p / den[ok])))
                best[(r, "P_h_perp")] = max(best[(r, "P_h_perp")], float(np.max(num_c / den[ok])))
    if skipped:
        log.info("stability_constants: skipped %d degenerate basis functions", skipped)
    return best


# -- analytic probe fields ----------------------------------------------------
def _grad_cos(x):
    a, b = np.pi * x[:, 0], np.pi * x[:, 1]
    return np.stack([-np.pi * np.sin(a) * np.cos(b), -np.pi * np.cos(a) * np.sin(b)], axis=1)


def _curl_bubble(x):
    # psi = (x (1 - x) y (1 - y))^2, v = (d_y psi, -d_x psi)
    X, Y = x[:, 0], x[:, 1]
    a, b = X * (1 - X), Y * (1 - Y)
    da, db = 1 - 2 * X, 1 - 2 * Y
    return np.stack([2 * a * a * b * db, -2 * a * da * b * b], axis=1)


def operator_convergence_probe(
    levels: Sequence[int] = (4, 8, 16, 32),
    bc_mode="strong",
    fields: dict = None,
) -> dict:
    """Decay of ``|P_h grad g|`` and ``|v - P_h v|`` under mesh refinement.

    ``g = cos(pi x) cos(pi y)`` (so the continuous projection of ``grad g``
    vanishes) and ``v = curl psi`` with ``psi = (x(1-x)y(1-y))^2`` (so it is
    fixed by the continuous projection).  Returns per-probe lists of norms
    and rates ``log2(e_k / e_{k+1}) / log2(n_{k+1} / n_k)``.
    """
    if fields is None:
        fields = {"grad_g": (_grad_cos, True), "curl_psi": (_curl_bubble, False)}
    report = {name: {"n": list(levels), "norm": [], "rate": []} for name in fields}
    for n in levels:
        fe = build_fe_system(build_square_mesh(n), bc_mode)
        ops = LerayOperators(fe)
        pts, w = ops.asm.points, ops.asm.weights
        ex, ey = ops.asm.velocity_basis_matrix()
        for name, (fn, kill) in fields.items():
            u = fn(pts)
            ph = leray_project(ops, u)
            vals = np.stack([ex @ ph, ey @ ph], axis=1)
            err = vals if kill else u - vals
            report[name]["norm"].append(lr_norm(err, w, 2.0))
    for name in fields:
        e = report[name]["norm"]
        for k in range(len(levels) - 1):
            if e[k] == 0 or e[k + 1] == 0:
                report[name]["rate"].append(float("nan"))
            else:
                report[name]["rate"].append(
                    math.log(e[k] / e[k + 1]) / math.log(levels[k + 1] / levels[k])
                )
    return report
