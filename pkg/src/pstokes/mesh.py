"""Structured triangulations of the unit square.

Vertices are stored as an ``(V, 2)`` array and triangles as an ``(T, 3)``
array of counter-clockwise vertex indices.  Local edge ``k`` of a triangle is
the edge opposite local vertex ``k``, i.e. it joins local vertices
``(k + 1) % 3`` and ``(k + 2) % 3``.  This convention fixes the numbering of
the quadratic edge nodes in :mod:`pstokes.spaces`.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

__all__ = ["Triangulation", "build_square_mesh", "refine_uniform", "write_mesh_csv"]


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Triangle mesh with edge connectivity and boundary facets.

    Attributes
    ----------
    vertices : ndarray, shape (V, 2)
    triangles : ndarray, shape (T, 3)
        Positively oriented vertex triples.
    edges : ndarray, shape (E, 2)
        Sorted vertex pairs, one row per unique edge.
    edge_triangles : ndarray, shape (E, 2)
        Adjacent triangles; the second entry is ``-1`` on boundary edges.
    triangle_edges : ndarray, shape (T, 3)
        Global edge index of local edge ``k`` (opposite local vertex ``k``).
    facet_edges, facet_normals, facet_triangles : ndarray
        Boundary facets: edge index, outward unit normal and adjacent triangle.
    facet_vertices : ndarray, shape (F, 2)
        Facet endpoints in the counter-clockwise order of the adjacent triangle.
    corners : ndarray of bool, shape (V,)
        Vertices where two different outward normals meet.
    h : float
        Maximal edge length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    triangle_edges: np.ndarray
    facet_edges: np.ndarray
    facet_normals: np.ndarray
    facet_triangles: np.ndarray
    facet_vertices: np.ndarray
    corners: np.ndarray
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_facets(self) -> int:
        return len(self.facet_edges)

    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for the stored orientation)."""
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)


def _from_triangles(vertices: np.ndarray, triangles: np.ndarray) -> Triangulation:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    nt = len(triangles)

    local = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )  # (T, 3, 2), directed counter-clockwise
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    triangle_edges = inverse.reshape(nt, 3)

    counts = np.bincount(inverse, minlength=len(edges))
    if counts.max() > 2:
        raise ValueError("non-manifold edge in triangulation")
    edge_triangles = -np.ones((len(edges), 2), dtype=np.int64)
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_triangles[sorted_edges[first], 0] = owner[order[first]]
    edge_triangles[sorted_edges[~first], 1] = owner[order[~first]]

    boundary = np.flatnonzero(counts == 1)
    slot = np.flatnonzero(counts[inverse] == 1)  # flat (triangle, local edge) slots
    slot = slot[np.argsort(inverse[slot], kind="stable")]
    facet_edges = inverse[slot]
    assert np.array_equal(facet_edges, boundary)
    facet_triangles = slot // 3
    facet_vertices = local.reshape(-1, 2)[slot]
    d = vertices[facet_vertices[:, 1]] - vertices[facet_vertices[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    facet_normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]

    corners = np.zeros(len(vertices), dtype=bool)
    incident: dict[int, list[int]] = {}
    for f, (a, b) in enumerate(facet_vertices):
        incident.setdefault(int(a), []).append(f)
        incident.setdefault(int(b), []).append(f)
    for v, fs in incident.items():
        n = facet_normals[fs]
        if np.abs(n - n[0]).max() > 1e-12:
            corners[v] = True

    e = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    h = float(np.hypot(e[:, 0], e[:, 1]).max())
    return Triangulation(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_triangles=edge_triangles,
        triangle_edges=triangle_edges,
        facet_edges=facet_edges,
        facet_normals=facet_normals,
        facet_triangles=facet_triangles,
        facet_vertices=facet_vertices,
        corners=corners,
        h=h,
    )


def build_square_mesh(n: int) -> Triangulation:
    """Split the unit square into ``n**2`` squares, each cut along the
    lower-left to upper-right diagonal.

    >>> m = build_square_mesh(1)
    >>> m.n_triangles, m.n_vertices, m.n_facets
    (2, 4, 4)
    """
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    s = np.arange(n + 1) / n
    x, y = np.meshgrid(s, s)
    vertices = np.stack([x.ravel(), y.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return _from_triangles(vertices, triangles)


def refine_uniform(mesh: Triangulation) -> Triangulation:
    """Red refinement: every triangle is split into four through its edge
    midpoints.  Midpoint ``e`` becomes vertex ``V + e``."""
    nv = mesh.n_vertices
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints()])
    t = mesh.triangles
    m = nv + mesh.triangle_edges  # m[:, k] is the midpoint opposite vertex k
    children = np.stack(
        [
            np.stack([t[:, 0], m[:, 2], m[:, 1]], axis=1),
            np.stack([m[:, 2], t[:, 1], m[:, 0]], axis=1),
            np.stack([m[:, 1], m[:, 0], t[:, 2]], axis=1),
            np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    return _from_triangles(vertices, children)


def write_mesh_csv(mesh: Triangulation, directory: str) -> None:
    """Dump a mesh for debugging.

    Writes ``vertices.csv`` (index, x, y), ``triangles.csv`` (index, v0, v1,
    v2) and ``boundary_facets.csv`` (facet, edge, v0, v1, nx, ny, triangle).
    """
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x", "y"])
        for k, (x, y) in enumerate(mesh.vertices):
            w.writerow([k, repr(float(x)), repr(float(y))])
    with open(os.path.join(directory, "triangles.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "v0", "v1", "v2"])
        for k, tri in enumerate(mesh.triangles):
            w.writerow([k, *map(int, tri)])
    with open(os.path.join(directory, "boundary_facets.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["facet", "edge", "v0", "v1", "nx", "ny", "triangle"])
        for f in range(mesh.n_facets):
            a, b = mesh.facet_vertices[f]
            nx, ny = mesh.facet_normals[f]
            w.writerow(
                [f, int(mesh.facet_edges[f]), int(a), int(b), repr(float(nx)),
                 repr(float(ny)), int(mesh.facet_triangles[f])]
            )
