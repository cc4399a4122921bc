"""Global assembly of the Taylor-Hood forms.

Everything is evaluated on one :class:`~pstokes.quadrature.ElementQuadrature`
per :class:`~pstokes.spaces.FeSystem` (degree 6, graded near the origin), so
per-point local contributions are reduced to per-element blocks with
``np.add.reduceat`` and scattered with ``np.bincount`` / COO summation in a
fixed order.  Repeated assemblies of the same input are bit-identical.
"""
from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp

from . import nfunction
from .quadrature import element_quadrature, gauss_interval
from .spaces import BCMode, FeSystem, eval_basis

__all__ = [
    "Assembler",
    "assembler",
    "assemble_mass",
    "assemble_stress",
    "assemble_divergence",
    "assemble_normal_trace",
    "assemble_rhs",
]

EDGE_POINTS = 4
TIME_POINTS = 3


class Assembler:
    """Cached basis data on the quadrature points of one FE system."""

    def __init__(self, fe: FeSystem, degree: int = 6, singular_point=(0.0, 0.0), levels: int = 20):
        self.fe = fe
        mesh = fe.mesh
        self.quad = q = element_quadrature(mesh, degree, singular_point, levels)
        self.weights = q.weights
        self.points = q.points
        el = q.element

        xy = mesh.vertices[mesh.triangles]
        jac = np.stack([xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]], axis=2)  # columns d1, d2
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)

        self.phi, ref_grad = eval_basis("P2", q.ref_points)
        self.dphi = np.einsum("nij,naj->nai", inv_t[el], ref_grad)
        self.psi, ref_grad1 = eval_basis("P1", q.ref_points)
        self.dpsi = np.einsum("nij,naj->nai", inv_t[el], ref_grad1)

        # local symmetric-gradient basis, (N, 12, 4) flattened 2x2 tensors
        eps = np.zeros((len(q), 12, 2, 2))
        for c in range(2):
            eps[:, 6 * c:6 * c + 6, c, :] += 0.5 * self.dphi
            eps[:, 6 * c:6 * c + 6, :, c] += 0.5 * self.dphi
        self.eps = eps.reshape(len(q), 12, 4)
        # divergence of local velocity basis, (N, 12)
        self.div = np.concatenate([self.dphi[:, :, 0], self.dphi[:, :, 1]], axis=1)

        vd = fe.elem_vdofs
        pd = fe.elem_pdofs
        self._vv = (np.repeat(vd, 12, axis=1).ravel(), np.tile(vd, (1, 12)).ravel())
        self._pv = (np.repeat(pd, 12, axis=1).ravel(), np.tile(vd, (1, 3)).ravel())
        self._pp = (np.repeat(pd, 3, axis=1).ravel(), np.tile(pd, (1, 3)).ravel())
        self._cache = {}

    # -- reductions -------------------------------------------------------
    def _reduce(self, local):
        return np.add.reduceat(local, self.quad.offsets, axis=0)

    def _matrix(self, blocks, index, shape):
        rows, cols = index
        return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=shape).tocsr()

    def _vector(self, blocks, dofs, n):
        return np.bincount(dofs.ravel(), weights=blocks.ravel(), minlength=n)

    # -- evaluation at quadrature points --------------------------------------
    def velocity_at(self, v):
        """Values ``(N, 2)`` and gradients ``(N, 2, 2)`` (``[i, j] = d_j v_i``)."""
        local = np.asarray(v)[self.fe.elem_vdofs].reshape(-1, 2, 6)[self.quad.element]
        values = np.einsum("nia,na->ni", local, self.phi)
        grads = np.einsum("nia,naj->nij", local, self.dphi)
        return values, grads

    def pressure_at(self, q):
        local = np.asarray(q)[self.fe.elem_pdofs][self.quad.element]
        return np.einsum("na,na->n", local, self.psi)

    def velocity_basis_matrix(self):
        """Sparse matrices ``(Ex, Ey)`` with ``Ex @ v`` the x-component at the points."""
        if "basis" not in self._cache:
            n = len(self.quad)
            rows = np.repeat(np.arange(n), 6)
            nodes = self.fe.elem_nodes[self.quad.element].ravel()
            shape = (n, self.fe.n_v)
            ex = sp.csr_matrix((self.phi.ravel(), (rows, nodes)), shape=shape)
            ey = sp.csr_matrix((self.phi.ravel(), (rows, nodes + self.fe.n_nodes)), shape=shape)
            self._cache["basis"] = (ex, ey)
        return self._cache["basis"]

    # -- linear forms ----------------------------------------------------------
    def mass(self):
        if "mass" not in self._cache:
            w = self.weights
            local = self._reduce(np.einsum("n,na,nb->nab", w, self.phi, self.phi))
            blocks = np.zeros((len(local), 12, 12))
            blocks[:, :6, :6] = local
            blocks[:, 6:, 6:] = local
            n = self.fe.n_v
            self._cache["mass"] = self._matrix(blocks, self._vv, (n, n))
        return self._cache["mass"]

    def pressure_mass(self):
        if "pmass" not in self._cache:
            local = self._reduce(np.einsum("n,na,nb->nab", self.weights, self.psi, self.psi))
            n = self.fe.n_q
            self._cache["pmass"] = self._matrix(local, self._pp, (n, n))
        return self._cache["pmass"]

    def pressure_integrals(self):
        """``(psi_k, 1)`` for every pressure basis function."""
        if "pint" not in self._cache:
            local = self._reduce(self.weights[:, None] * self.psi)
            self._cache["pint"] = self._vector(local, self.fe.elem_pdofs, self.fe.n_q)
        return self._cache["pint"]

    def divergence(self):
        if "div" not in self._cache:
            local = self._reduce(np.einsum("n,na,nb->nab", self.weights, self.psi, self.div))
            self._cache["div"] = self._matrix(local, self._pv, (self.fe.n_q, self.fe.n_v))
        return self._cache["div"]

    def symmetric_gradient_stiffness(self):
        """``(eps(phi_j), eps(phi_i))``; the p = 2 stress Jacobian for nu0 = 1."""
        local = self._reduce(np.einsum("n,nli,nki->nlk", self.weights, self.eps, self.eps))
        n = self.fe.n_v
        return self._matrix(local, self._vv, (n, n))

    def normal_trace(self):
        fe = self.fe
        if fe.bc_mode is not BCMode.WEAK:
            return sp.csr_matrix((0, fe.n_v))
        if "trace" not in self._cache:
            mesh = fe.mesh
            rule = gauss_interval(EDGE_POINTS)
            s = rule.points
            shape = np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=1)
            mult = np.stack([1 - s, s], axis=1)
            ends = mesh.vertices[mesh.facet_vertices]
            length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
            base = np.einsum("g,gm,gj->mj", rule.weights, mult, shape)  # (2, 3)
            rows, cols, vals = [], [], []
            for c in range(2):
                blk = (length * mesh.facet_normals[:, c])[:, None, None] * base
                rows.append(np.repeat(fe.facet_lam, 3, axis=1).ravel())
                cols.append(np.tile(fe.facet_nodes + c * fe.n_nodes, (1, 2)).ravel())
                vals.append(blk.ravel())
            self._cache["trace"] = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(fe.n_lam, fe.n_v),
            ).tocsr()
        return self._cache["trace"]

    def normal_moments(self, g, t):
        """``(mu_m, g(t, .))_Gamma`` for every multiplier DOF ``m``.

        ``g(t, x, n)`` is evaluated at the edge Gauss points.
        """
        fe = self.fe
        mesh = fe.mesh
        rule = gauss_interval(EDGE_POINTS)
        s = rule.points
        ends = mesh.vertices[mesh.facet_vertices]
        x = ends[:, :1] + s[None, :, None] * (ends[:, 1:] - ends[:, :1])  # (F, G, 2)
        length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
        normals = np.broadcast_to(mesh.facet_normals[:, None], x.shape)
        values = np.asarray(g(t, x.reshape(-1, 2), normals.reshape(-1, 2))).reshape(x.shape[:2])
        mult = np.stack([1 - s, s], axis=1)
        mom = length[:, None] * np.einsum("g,fg,gm->fm", rule.weights, values, mult)
        return mom.ravel()

    def load(self, f=None, G=None, s=None):
        """``(f, phi) + (G, grad phi) - (s, div phi)`` from point values.

        ``f`` is ``(N, 2)``, ``G`` is ``(N, 2, 2)`` and ``s`` is ``(N,)``;
        any of them may be omitted.
        """
        w = self.weights
        local = np.zeros((len(w), 12))
        if f is not None:
            local[:, :6] += (w * f[:, 0])[:, None] * self.phi
            local[:, 6:] += (w * f[:, 1])[:, None] * self.phi
        if G is not None:
            local[:, :6] += np.einsum("n,nj,naj->na", w, G[:, 0, :], self.dphi)
            local[:, 6:] += np.einsum("n,nj,naj->na", w, G[:, 1, :], self.dphi)
        if s is not None:
            local -= (w * s)[:, None] * self.div
        return self._vector(self._reduce(local), self.fe.elem_vdofs, self.fe.n_v)

    # -- nonlinear stress ------------------------------------------------------
    def stress(self, params: nfunction.PowerLawParams, v, jacobian: bool = True):
        """Residual ``(S(eps(v)), eps(phi_i))`` and its Jacobian."""
        _, grads = self.velocity_at(v)
        E = nfunction.sym(grads)
        S = nfunction.stress(params, E)
        w = self.weights
        eps = self.eps
        res_local = self._reduce(w[:, None] * np.matmul(eps, S.reshape(-1, 4, 1))[:, :, 0])
        residual = self._vector(res_local, self.fe.elem_vdofs, self.fe.n_v)
        if not jacobian:
            return residual, None
        a, b = nfunction.stress_tangent_coefficients(params, E)
        proj = np.matmul(eps, E.reshape(-1, 4, 1))  # (N, 12, 1)
        if "eps_t" not in self._cache:
            self._cache["eps_t"] = np.ascontiguousarray(eps.transpose(0, 2, 1))
        local = np.matmul((w * a)[:, None, None] * eps, self._cache["eps_t"])
        local += np.matmul((w * b)[:, None, None] * proj, proj.transpose(0, 2, 1))
        n = self.fe.n_v
        return residual, self._matrix(self._reduce(local), self._vv, (n, n))


_ASSEMBLERS: "weakref.WeakKeyDictionary[FeSystem, Assembler]" = weakref.WeakKeyDictionary()


def assembler(fe: FeSystem) -> Assembler:
    """Shared :class:`Assembler` for ``fe`` (built on first use)."""
    try:
        return _ASSEMBLERS[fe]
    except KeyError:
        asm = _ASSEMBLERS[fe] = Assembler(fe)
        return asm


def assemble_mass(fe: FeSystem):
    return assembler(fe).mass()


def assemble_stress(fe: FeSystem, params, v_coeffs):
    return assembler(fe).stress(params, v_coeffs)


def assemble_divergence(fe: FeSystem):
    return assembler(fe).divergence()


def assemble_normal_trace(fe: FeSystem):
    """Multiplier-by-velocity trace matrix; empty (0 rows) in strong mode."""
    return assembler(fe).normal_trace()


def assemble_rhs(fe: FeSystem, case, interval):
    """Time average over ``interval`` of the weak-residual functional of ``case``.

    ``case.load_data(t, x)`` must return ``(f, G, s)`` point values for
    :meth:`Assembler.load`.  The average uses the 3-point Gauss rule.
    """
    t0, t1 = interval
    if not t1 > t0:
        raise ValueError(f"empty time interval {interval}")
    asm = assembler(fe)
    rule = gauss_interval(TIME_POINTS)
    out = np.zeros(fe.n_v)
    for s, w in zip(rule.points, rule.weights):
        out += w * asm.load(*case.load_data(t0 + s * (t1 - t0), asm.points))
    return out
