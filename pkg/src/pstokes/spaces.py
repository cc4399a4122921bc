"""Taylor-Hood spaces (P2 velocity, P1 pressure) and the boundary multiplier.

Scalar P2 nodes are numbered vertices first, then edge midpoints
(``V + edge``).  Velocity DOFs are blocked by component:
``dof = component * n_nodes + node``.  The multiplier space is the broken
P1 space on boundary facets with DOFs ``2 f`` and ``2 f + 1`` attached to
the two endpoints ``mesh.facet_vertices[f]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import Triangulation

__all__ = ["BCMode", "FeSystem", "build_fe_system", "eval_basis", "P2_NODES", "P1_NODES"]


class BCMode(str, enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


P1_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
P2_NODES = np.array(
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]]
)


def eval_basis(kind: str, points):
    """Lagrange shape functions on the reference triangle.

    Parameters
    ----------
    kind : {"P2", "P1"}
    points : array_like, shape (n, 2) or (2,)

    Returns
    -------
    values : ndarray, shape (n, nb)
    grads : ndarray, shape (n, nb, 2)
        Gradients with respect to the reference coordinates.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    tol = 1e-12
    if np.any(x < -tol) or np.any(y < -tol) or np.any(x + y > 1 + tol):
        raise ValueError("point outside the reference triangle")
    l0 = 1.0 - x - y
    lam = (l0, x, y)
    dlam = (np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    n = len(pts)
    kind = kind.upper().replace("-SCALAR", "")
    if kind == "P1":
        values = np.stack(lam, axis=1)
        grads = np.broadcast_to(np.stack(dlam), (n, 3, 2)).copy()
        return values, grads
    if kind != "P2":
        raise ValueError(f"unknown element kind {kind!r}")
    values = np.empty((n, 6))
    grads = np.empty((n, 6, 2))
    for i in range(3):
        values[:, i] = lam[i] * (2.0 * lam[i] - 1.0)
        grads[:, i] = (4.0 * lam[i] - 1.0)[:, None] * dlam[i]
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        values[:, 3 + k] = 4.0 * lam[a] * lam[b]
        grads[:, 3 + k] = 4.0 * (lam[a][:, None] * dlam[b] + lam[b][:, None] * dlam[a])
    return values, grads


NormalData = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class FeSystem:
    """DOF bookkeeping for velocity, pressure and boundary multiplier.

    In strong mode ``constrained_dofs`` lists one velocity DOF per boundary
    node and incident outward normal (two at corners); their values are
    ``g(t, x, n) / n_c`` for the axis-aligned normal ``n = +-e_c``.
    """

    mesh: Triangulation
    bc_mode: BCMode
    nodes: np.ndarray
    elem_nodes: np.ndarray
    elem_vdofs: np.ndarray
    elem_pdofs: np.ndarray
    facet_nodes: np.ndarray
    facet_lam: np.ndarray
    constrained_dofs: np.ndarray
    constrained_nodes: np.ndarray
    constrained_normals: np.ndarray
    free_dofs: np.ndarray
    normal_data: Optional[NormalData] = None
    mean_zero_pressure: bool = True

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_v(self) -> int:
        return 2 * len(self.nodes)

    @property
    def n_q(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_lam(self) -> int:
        return 2 * self.mesh.n_facets if self.bc_mode is BCMode.WEAK else 0

    @property
    def constrained(self) -> list:
        """``(dof, value)`` pairs at ``t = 0``; see :meth:`constrained_values`."""
        return list(zip(self.constrained_dofs.tolist(), self.constrained_values(0.0).tolist()))

    def constrained_values(self, t: float) -> np.ndarray:
        if self.normal_data is None or len(self.constrained_dofs) == 0:
            return np.zeros(len(self.constrained_dofs))
        x = self.nodes[self.constrained_nodes]
        n = self.constrained_normals
        g = np.asarray(self.normal_data(t, x, n), dtype=float)
        comp = self.constrained_dofs // self.n_nodes
        return g / n[np.arange(len(n)), comp]

    def interpolate(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal P2 interpolant of a vector field ``fn(x) -> (n, 2)``."""
        values = np.asarray(fn(self.nodes), dtype=float)
        return np.concatenate([values[:, 0], values[:, 1]])

    def interpolate_scalar(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal P1 interpolant of a scalar field."""
        return np.asarray(fn(self.mesh.vertices), dtype=float).copy()


def build_fe_system(
    mesh: Triangulation,
    bc_mode="strong",
    normal_data: Optional[NormalData] = None,
    inhomogeneous: bool = False,
) -> FeSystem:
    """Taylor-Hood DOF maps on ``mesh`` with impermeability imposed strongly
    or through the facet multiplier.

    ``normal_data(t, x, n)`` returns the prescribed ``v . n`` at boundary
    points ``x`` with normals ``n``; ``None`` means homogeneous data.
    """
    bc_mode = BCMode(bc_mode)
    if bc_mode is BCMode.STRONG and inhomogeneous and normal_data is None:
        raise ValueError("strong imposition of inhomogeneous normal data needs normal_data")

    nv = mesh.n_vertices
    nodes = np.vstack([mesh.vertices, mesh.edge_midpoints()])
    n_nodes = len(nodes)
    elem_nodes = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
    elem_vdofs = np.hstack([elem_nodes, elem_nodes + n_nodes])

    facet_nodes = np.column_stack(
        [mesh.facet_vertices[:, 0], mesh.facet_vertices[:, 1], nv + mesh.facet_edges]
    )
    facet_lam = np.arange(2 * mesh.n_facets).reshape(-1, 2)

    if np.any(np.abs(mesh.facet_normals).max(axis=1) < 1 - 1e-12):
        raise ValueError("strong imposition implemented for axis-aligned boundaries only")

    entries = {}
    if bc_mode is BCMode.STRONG:
        for f in range(mesh.n_facets):
            normal = mesh.facet_normals[f]
            comp = int(np.argmax(np.abs(normal)))
            for node in facet_nodes[f]:
                entries.setdefault((int(node), comp), normal)
    keys = sorted(entries, key=lambda k: (k[1] * n_nodes + k[0]))
    constrained_nodes = np.array([k[0] for k in keys], dtype=np.int64)
    constrained_dofs = np.array([k[1] * n_nodes + k[0] for k in keys], dtype=np.int64)
    constrained_normals = np.array([entries[k] for k in keys]).reshape(-1, 2)
    mask = np.ones(2 * n_nodes, dtype=bool)
    mask[constrained_dofs] = False

    return FeSystem(
        mesh=mesh,
        bc_mode=bc_mode,
        nodes=nodes,
        elem_nodes=elem_nodes,
        elem_vdofs=elem_vdofs,
        elem_pdofs=mesh.triangles.copy(),
        facet_nodes=facet_nodes,
        facet_lam=facet_lam,
        constrained_dofs=constrained_dofs,
        constrained_nodes=constrained_nodes,
        constrained_normals=constrained_normals,
        free_dofs=np.flatnonzero(mask),
        normal_data=normal_data,
    )
