"""Backward-Euler time stepping with Newton's method.

Per step the unknowns are the free velocity DOFs, the full P1 pressure, the
facet multiplier (weak mode only) and one scalar ``s`` bordering the
zero-mean pressure constraint.  The Newton matrix is

    [ M/tau + DS   -B^T   T^T   0 ]
    [ -B            0     0     c ]
    [ T             0     0     0 ]
    [ 0             c^T   0     0 ]

with ``c_k = (psi_k, 1)``.  The ``c s`` column absorbs the incompatibility
``int div v != 0`` of interpolated inhomogeneous boundary data.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import assemble_rhs, assembler
from .nfunction import PowerLawParams
from .spaces import BCMode, FeSystem

__all__ = [
    "TimeGrid",
    "DiscreteState",
    "NewtonDivergedError",
    "SingularSystemError",
    "solve_saddle_linear",
    "factorize_saddle",
    "PStokesSolver",
    "newton_step_solve",
    "time_march",
    "write_solver_stats",
]

log = logging.getLogger(__name__)

TOL_ABS = 1.0e-10
TOL_REL = 1.0e-8
MAX_ITER = 50
MAX_HALVINGS = 10


class SingularSystemError(RuntimeError):
    """Sparse factorization failed or produced an unusable solution."""


class NewtonDivergedError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0 or int(self.M) != self.M or self.M < 1:
            raise ValueError(f"invalid time grid T={self.T}, M={self.M}")

    @property
    def tau(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        return self.tau * np.arange(self.M + 1)

    @classmethod
    def for_level(cls, T: float, level: int) -> "TimeGrid":
        """Step size ``T 2^(-level-2)``."""
        return cls(T, 2 ** (level + 2))


@dataclass(frozen=True, eq=False)
class DiscreteState:
    v: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    t: float
    m: int
    newton_iterations: int = 0
    residual_norms: tuple = field(default=(), repr=False)


class _BorderedLU:
    """LU of a matrix whose last row and column are dense.

    A dense border wrecks the fill-reducing column ordering, so the border
    is swapped for a one-entry pin (still nonsingular), that matrix is
    factorized, and the original is recovered by a rank-2
    Sherman-Morrison-Woodbury correction.
    """

    def __init__(self, K):
        K = sp.csc_matrix(K)
        n = K.shape[0]
        last = n - 1
        col = K[:, last].toarray().ravel()
        row = K[last, :].toarray().ravel()
        col_off = col.copy()
        col_off[last] = 0.0
        pin = int(np.argmax(np.abs(col_off)))
        if col_off[pin] == 0.0:
            raise SingularSystemError("singular linear system: empty border")
        keep = sp.diags(np.r_[np.ones(last), 0.0])
        Kp = (keep @ K @ keep).tolil()
        Kp[last, pin] = 1.0
        Kp[pin, last] = 1.0
        self._lu = _splu(Kp)
        e_last = np.zeros(n)
        e_last[last] = 1.0
        dc = col.copy()
        dc[pin] -= 1.0
        dr = row.copy()
        dr[pin] -= 1.0
        dr[last] = 0.0
        self._U = np.column_stack([dc, e_last])
        self._Vt = np.vstack([e_last, dr])
        self._KU = self._lu.solve(self._U)
        cap = np.eye(2) + self._Vt @ self._KU
        if not np.all(np.isfinite(cap)) or abs(np.linalg.det(cap)) < 1e-14 * max(1.0, np.abs(cap).max()) ** 2:
            raise SingularSystemError("singular linear system: degenerate border correction")
        self._cap = cap

    def solve(self, b):
        y = self._lu.solve(b)
        return y - self._KU @ np.linalg.solve(self._cap, self._Vt @ y)


def _splu(K):
    try:
        return splu(sp.csc_matrix(K))
    except RuntimeError as exc:
        raise SingularSystemError(f"singular linear system: {exc}") from exc


def factorize_saddle(K, dense_border: bool = False):
    """Sparse LU (SuperLU, COLAMD ordering, partial pivoting); with
    ``dense_border`` the last row/column is handled by a low-rank update."""
    return _BorderedLU(K) if dense_border else _splu(K)


def solve_saddle_linear(K, b, rtol: float = 1e-10, fail_rtol: float = 1e-6,
                        dense_border: bool = False):
    """Direct solve with a residual check.

    One step of iterative refinement is taken if the relative residual
    exceeds ``rtol``; a residual still above ``fail_rtol`` afterwards, a
    non-finite solution or a zero pivot raise :class:`SingularSystemError`.
    """
    b = np.asarray(b, dtype=float)
    K = sp.csc_matrix(K)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(K.shape[1])
    lu = factorize_saddle(K, dense_border)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("singular linear system: non-finite solution")
    res = np.linalg.norm(K @ x - b) / bnorm
    if res > rtol:
        x = x + lu.solve(b - K @ x)
        res = np.linalg.norm(K @ x - b) / bnorm
    if not np.isfinite(res) or res > fail_rtol:
        raise SingularSystemError(f"singular linear system: relative residual {res:.3e}")
    if res > rtol:
        log.warning("linear solve relative residual %.3e above %.1e", res, rtol)
    return x


class PStokesSolver:
    """Nonlinear per-step solver for one FE system and stress law.

    Parameters
    ----------
    fe : FeSystem
    params : PowerLawParams
    tol_abs, tol_rel : float
        Newton stops once ``|R| <= max(tol_abs, tol_rel |R_0|)``.
    """

    def __init__(
        self,
        fe: FeSystem,
        params: PowerLawParams,
        tol_abs: float = TOL_ABS,
        tol_rel: float = TOL_REL,
        max_iter: int = MAX_ITER,
        line_search: bool = True,
    ):
        self.fe = fe
        self.params = params
        self.tol_abs = tol_abs
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.line_search = line_search
        self.asm = asm = assembler(fe)
        self.M = asm.mass()
        self.B = asm.divergence()
        self.T = asm.normal_trace()
        self.c = asm.pressure_integrals()
        self.free = fe.free_dofs
        self.weak = fe.bc_mode is BCMode.WEAK
        f = self.free
        c = sp.csr_matrix(self.c.reshape(-1, 1))
        self._B_f = self.B[:, f]
        self._T_f = self.T[:, f] if self.weak else None
        self._c = c
        nf, nq, nl = len(f), fe.n_q, fe.n_lam
        self._split = np.cumsum([nf, nq, nl])
        self.size = nf + nq + nl + 1

    # -- unknown vector handling --------------------------------------------
    def _unpack(self, x, v_bc):
        nf, nq_end, nl_end = self._split
        v = np.empty(self.fe.n_v)
        v[self.fe.constrained_dofs] = v_bc
        v[self.free] = x[:nf]
        return v, x[nf:nq_end], x[nq_end:nl_end], x[nl_end]

    def _pack(self, v, q, lam, s):
        return np.concatenate([v[self.free], q, lam, [s]])

    def residual(self, x, v_prev, tau, load, v_bc, g_gamma, jacobian=False):
        v, q, lam, s = self._unpack(x, v_bc)
        stress_res, DS = self.asm.stress(self.params, v, jacobian=jacobian)
        r_v = self.M @ (v - v_prev) / tau + stress_res - self.B.T @ q - load
        if self.weak:
            r_v += self.T.T @ lam
        parts = [r_v[self.free], -(self.B @ v) + self.c * s]
        if self.weak:
            parts.append(self.T @ v - g_gamma)
        parts.append([self.c @ q])
        R = np.concatenate(parts)
        if not jacobian:
            return R, None
        f = self.free
        A = (self.M / tau + DS)[f][:, f]
        if self.weak:
            blocks = [
                [A, -self._B_f.T, self._T_f.T, None],
                [-self._B_f, None, None, self._c],
                [self._T_f, None, None, None],
                [None, self._c.T, None, None],
            ]
        else:
            blocks = [[A, -self._B_f.T, None], [-self._B_f, None, self._c], [None, self._c.T, None]]
        return R, sp.bmat(blocks, format="csc")

    def _lifting_step(self, x, v_start, v_prev, tau, load, bc_old, bc_new, g_gamma):
        R, K = self.residual(x, v_prev, tau, load, bc_old, g_gamma, jacobian=True)
        _, DS = self.asm.stress(self.params, v_start)
        f, c = self.free, self.fe.constrained_dofs
        K_c = sp.vstack([
            (self.M / tau + DS)[f][:, c],
            -self.B[:, c],
            self.T[:, c] if self.weak else sp.csr_matrix((0, len(c))),
            sp.csr_matrix((1, len(c))),
        ])
        dx = solve_saddle_linear(K, -R - K_c @ (bc_new - bc_old), dense_border=True)
        x = x + dx
        R, K = self.residual(x, v_prev, tau, load, bc_new, g_gamma, jacobian=True)
        return x, R, K, np.linalg.norm(R)

    # -- one implicit Euler step ----------------------------------------------
    def step(self, prev: DiscreteState, t: float, tau: float, load, v_bc=None, g_gamma=None,
             step_index: Optional[int] = None, guess: Optional[DiscreteState] = None) -> DiscreteState:
        """One implicit Euler step from ``prev``.

        Newton starts from ``guess`` (default: ``prev``, i.e. a warm start).
        """
        fe = self.fe
        v_bc = np.zeros(len(fe.constrained_dofs)) if v_bc is None else np.asarray(v_bc, float)
        g_gamma = np.zeros(fe.n_lam) if g_gamma is None else np.asarray(g_gamma, float)
        start = prev if guess is None else guess
        lam0 = start.lam if len(start.lam) == fe.n_lam else np.zeros(fe.n_lam)
        x = self._pack(start.v, start.q, lam0, 0.0)

        R, K = self.residual(x, prev.v, tau, load, v_bc, g_gamma, jacobian=True)
        norm = np.linalg.norm(R)
        if not np.isfinite(norm):
            raise NewtonDivergedError("non-finite residual", step_index)
        norms = [norm]
        target = max(self.tol_abs, self.tol_rel * norm)
        it = 0
        bc_start = start.v[fe.constrained_dofs]
        if norm > target and len(v_bc) and not np.array_equal(bc_start, v_bc):
            # lifting step: linearize about the start iterate with its own
            # boundary values and carry the boundary increment through the
            # Jacobian, so the jump is spread into the interior
            x, R, K, norm = self._lifting_step(x, start.v, prev.v, tau, load, bc_start, v_bc, g_gamma)
            if not np.isfinite(norm):
                raise NewtonDivergedError("non-finite residual", step_index)
            it = 1
            norms.append(norm)
        while norm > target:
            if it >= self.max_iter:
                raise NewtonDivergedError(
                    f"newton diverged: |R| = {norm:.3e} after {it} iterations", step_index
                )
            dx = solve_saddle_linear(K, -R, dense_border=True)
            it += 1
            alpha = 1.0
            best = None
            for _ in range(MAX_HALVINGS + 1):
                trial = x + alpha * dx
                R_trial, _ = self.residual(trial, prev.v, tau, load, v_bc, g_gamma)
                n_trial = np.linalg.norm(R_trial)
                if np.isfinite(n_trial) and (best is None or n_trial < best[1]):
                    best = (trial, n_trial)
                if not self.line_search or (np.isfinite(n_trial) and n_trial < (1 - 1e-4 * alpha) * norm):
                    break
                alpha *= 0.5
            if best is None:
                raise NewtonDivergedError("newton diverged: non-finite residual", step_index)
            x = best[0]
            R, K = self.residual(x, prev.v, tau, load, v_bc, g_gamma, jacobian=True)
            norm = np.linalg.norm(R)
            if not np.isfinite(norm):
                raise NewtonDivergedError("non-finite residual", step_index)
            norms.append(norm)
        v, q, lam, _ = self._unpack(x, v_bc)
        return DiscreteState(
            v=v, q=q.copy(), lam=lam.copy(), t=t, m=prev.m + 1,
            newton_iterations=it, residual_norms=tuple(norms),
        )

    def march(self, grid: TimeGrid, v0=None, forcing=None) -> list:
        """States at ``t_1, ..., t_M``.

        ``forcing`` supplies ``load_data(t, x)`` and ``normal_data(t, x, n)``
        (e.g. a :class:`~pstokes.manufactured.ManufacturedCase`); ``None``
        means zero forcing and homogeneous boundary data.
        """
        fe = self.fe
        v0 = np.zeros(fe.n_v) if v0 is None else np.asarray(v0, dtype=float)
        state = DiscreteState(v0, np.zeros(fe.n_q), np.zeros(fe.n_lam), 0.0, 0)
        states = []
        nodes = grid.nodes
        for m in range(1, grid.M + 1):
            t0, t1 = nodes[m - 1], nodes[m]
            if forcing is None:
                load = np.zeros(fe.n_v)
                v_bc = g_gamma = None
            else:
                load = assemble_rhs(fe, forcing, (t0, t1))
                if self.weak:
                    v_bc, g_gamma = None, self.asm.normal_moments(forcing.normal_data, t1)
                else:
                    v_bc = _constrained_values(fe, forcing, t1)
                    g_gamma = None
            state = self.step(state, t1, grid.tau, load, v_bc, g_gamma, step_index=m)
            log.debug("step %d: t=%.5f newton=%d |R|=%.2e", m, t1, state.newton_iterations,
                      state.residual_norms[-1])
            states.append(state)
        return states


def _constrained_values(fe: FeSystem, forcing, t):
    if len(fe.constrained_dofs) == 0:
        return np.zeros(0)
    x = fe.nodes[fe.constrained_nodes]
    n = fe.constrained_normals
    comp = fe.constrained_dofs // fe.n_nodes
    g = np.asarray(forcing.normal_data(t, x, n), dtype=float)
    return g / n[np.arange(len(n)), comp]


def newton_step_solve(fe, params, grid: TimeGrid, previous: DiscreteState, load, v_bc=None,
                      g_gamma=None, **options) -> DiscreteState:
    """Solve the step following ``previous`` on ``grid``."""
    solver = PStokesSolver(fe, params, **options)
    t = grid.nodes[previous.m + 1]
    return solver.step(previous, t, grid.tau, load, v_bc, g_gamma, step_index=previous.m + 1)


def time_march(fe, params, grid: TimeGrid, case=None, v0=None, stats_path=None, **options):
    """Run all ``grid.M`` steps; optionally write per-step Newton statistics."""
    states = PStokesSolver(fe, params, **options).march(grid, v0, case)
    if stats_path is not None:
        write_solver_stats(states, stats_path)
    return states


def write_solver_stats(states: Sequence[DiscreteState], path) -> None:
    """CSV columns: step, t, newton_iterations, initial_residual, final_residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "newton_iterations", "initial_residual", "final_residual"])
        for s in states:
            w.writerow([s.m, repr(float(s.t)), s.newton_iterations,
                        repr(float(s.residual_norms[0])), repr(float(s.residual_norms[-1]))])
