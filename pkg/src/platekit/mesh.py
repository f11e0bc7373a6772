"""Conforming triangulations of polygons with the entity sets the schemes need."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised when a triangulation violates a structural invariant."""


@dataclass(frozen=True)
class TriangleGeometry:
    """Geometry of one triangle.

    Local edge ``k`` is opposite local vertex ``k`` and runs counter-clockwise
    from vertex ``k+1`` to vertex ``k+2`` (indices mod 3).
    """

    vertices: np.ndarray  # (3, 2)
    edge_lengths: np.ndarray  # (3,)
    area: float
    normals: np.ndarray  # (3, 2) outward unit normals
    tangents: np.ndarray  # (3, 2) counter-clockwise unit tangents
    grad_lambda: np.ndarray  # (3, 2)
    signs: np.ndarray = field(default_factory=lambda: np.ones(3, dtype=int))

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 * self.area))

    def edge_endpoints(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of local edge ``k`` in counter-clockwise order."""
        return self.vertices[(k + 1) % 3], self.vertices[(k + 2) % 3]

    def global_endpoints(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of local edge ``k`` in the global edge orientation."""
        a, b = self.edge_endpoints(k)
        return (a, b) if self.signs[k] > 0 else (b, a)


def triangle_geometry(vertices, signs=None) -> TriangleGeometry:
    v = np.asarray(vertices, dtype=float)
    e1, e2 = v[1] - v[0], v[2] - v[0]
    area2 = e1[0] * e2[1] - e1[1] * e2[0]
    scale2 = max(float(np.sum(e1**2)), float(np.sum(e2**2)), 1e-300)
    if abs(area2) <= 1e-14 * scale2:
        raise MeshError("degenerate (zero-area) triangle")
    if area2 < 0:
        raise MeshError("triangle is not counter-clockwise")
    tangents = np.empty((3, 2))
    lengths = np.empty(3)
    for k in range(3):
        d = v[(k + 2) % 3] - v[(k + 1) % 3]
        lengths[k] = np.hypot(*d)
        tangents[k] = d / lengths[k]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    # grad(lambda_k) points from edge k towards vertex k: -n_k / height_k
    grad_lambda = -normals * (lengths / area2)[:, None]
    s = np.ones(3, dtype=int) if signs is None else np.asarray(signs, dtype=int)
    return TriangleGeometry(v, lengths, 0.5 * area2, normals, tangents, grad_lambda, s)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation.

    ``edges`` are stored with the lower vertex index first; ``tri_edges[t, k]``
    is the edge opposite local vertex ``k`` and ``tri_edge_signs[t, k]`` is +1
    when the counter-clockwise traversal of triangle ``t`` agrees with the
    global edge orientation.  ``edge_tris[e]`` holds the adjacent triangles,
    padded with -1 on boundary edges.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    edge_tris: np.ndarray
    boundary_vertex: np.ndarray
    boundary_edge: np.ndarray

    # -- construction -----------------------------------------------------
    @classmethod
    def from_arrays(cls, vertices, triangles, check: bool = True) -> Mesh:
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        nt = len(triangles)
        if nt == 0:
            raise MeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle references a missing vertex")

        local = np.stack(
            [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
        )  # (nt, 3, 2) counter-clockwise endpoints of edge k
        flat = local.reshape(-1, 2)
        key = np.sort(flat, axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if counts.max() > 2:
            raise MeshError("non-manifold edge shared by more than two triangles")
        tri_edges = inverse.reshape(nt, 3)
        signs = np.where(flat[:, 0] < flat[:, 1], 1, -1).reshape(nt, 3)

        ne = len(edges)
        edge_tris = -np.ones((ne, 2), dtype=np.int64)
        owner = np.repeat(np.arange(nt), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_e = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_e[1:] != sorted_e[:-1]
        edge_tris[sorted_e[first], 0] = owner[order][first]
        edge_tris[sorted_e[~first], 1] = owner[order][~first]

        boundary_edge = counts == 1
        boundary_vertex = np.zeros(len(vertices), dtype=bool)
        boundary_vertex[edges[boundary_edge].ravel()] = True

        mesh = cls(
            vertices,
            triangles,
            edges,
            tri_edges,
            signs,
            edge_tris,
            boundary_vertex,
            boundary_edge,
        )
        if check:
            mesh.check()
        return mesh

    # -- counts -----------------------------------------------------------
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
    def n_interior_vertices(self) -> int:
        return int(np.count_nonzero(~self.boundary_vertex))

    @property
    def n_interior_edges(self) -> int:
        return int(np.count_nonzero(~self.boundary_edge))

    @property
    def h(self) -> float:
        """Mesh size ``N**-1/2`` with ``N`` the number of triangles."""
        return self.n_triangles ** -0.5

    @property
    def areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def vertex_triangles(self) -> list[list[tuple[int, int]]]:
        """Per vertex, the ``(triangle, local vertex)`` slots touching it."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for t, tri in enumerate(self.triangles):
            for j, v in enumerate(tri):
                out[v].append((t, j))
        return out

    def geometry(self, t: int) -> TriangleGeometry:
        return triangle_geometry(self.vertices[self.triangles[t]], self.tri_edge_signs[t])

    # -- validation -------------------------------------------------------
    def check(self) -> None:
        """Raise :class:`MeshError` unless all structural invariants hold."""
        if np.any(self.areas <= 0):
            raise MeshError("triangles must have positive (counter-clockwise) area")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError("mesh has vertices not attached to any triangle")
        interior = ~self.boundary_edge
        for e in np.flatnonzero(interior):
            t0, t1 = self.edge_tris[e]
            k0 = int(np.flatnonzero(self.tri_edges[t0] == e)[0])
            k1 = int(np.flatnonzero(self.tri_edges[t1] == e)[0])
            if self.tri_edge_signs[t0, k0] == self.tri_edge_signs[t1, k1]:
                raise MeshError("inconsistently oriented neighbouring triangles")
        self._check_hanging()
        euler = self.n_vertices - self.n_edges + self.n_triangles
        if euler != 1:
            raise MeshError(f"Euler characteristic {euler} != 1 (domain not simply connected)")

    def _check_hanging(self) -> None:
        bedges = self.edges[self.boundary_edge]
        a = self.vertices[bedges[:, 0]]
        b = self.vertices[bedges[:, 1]]
        d = b - a
        length2 = np.sum(d**2, axis=1)
        for v, x in enumerate(self.vertices):
            if not self.boundary_vertex[v]:
                continue
            r = x - a
            s = np.sum(r * d, axis=1) / length2
            dist2 = np.sum((r - s[:, None] * d) ** 2, axis=1)
            inside = (s > 1e-12) & (s < 1 - 1e-12) & (dist2 < 1e-20 * length2)
            if np.any(inside):
                raise MeshError(f"hanging vertex {v} on a boundary edge")

    # -- refinement -------------------------------------------------------
    def refine_uniform(self) -> Mesh:
        """Red refinement: every triangle is split into four similar children."""
        nv = self.n_vertices
        mids = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        vertices = np.vstack([self.vertices, mids])
        v0, v1, v2 = self.triangles.T
        m0, m1, m2 = (nv + self.tri_edges).T
        children = np.concatenate(
            [
                np.column_stack([v0, m2, m1]),
                np.column_stack([m2, v1, m0]),
                np.column_stack([m1, m0, v2]),
                np.column_stack([m0, m1, m2]),
            ]
        )
        return Mesh.from_arrays(vertices, children)

    # -- file interface ---------------------------------------------------
    def save(self, path) -> None:
        lines = [f"v {x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"t {i} {j} {k}" for i, j, k in self.triangles]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> Mesh:
        """Read ``v x y`` / ``t i j k`` lines (0-based indices, '#' comments)."""
        verts, tris = [], []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            try:
                if tag == "v" and len(rest) == 2:
                    verts.append([float(r) for r in rest])
                elif tag == "t" and len(rest) == 3:
                    tris.append([int(r) for r in rest])
                else:
                    raise ValueError
            except ValueError:
                raise MeshError(f"{path}:{lineno}: cannot parse {raw!r}") from None
        return cls.from_arrays(np.array(verts), np.array(tris))


DIAGONALS = ("alternating", "rising", "falling")


def build_uniform_square(n: int, diagonal: str = "alternating") -> Mesh:
    """``n x n`` squares on the unit square, each cut into two triangles.

    ``diagonal`` picks the cut: ``rising`` (lower left to upper right) or
    ``falling`` in every cell, or ``alternating`` in a checkerboard with the
    rising cut in the lower-left cell.  Entity counts do not depend on it.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if diagonal not in DIAGONALS:
        raise ValueError(f"unknown diagonal pattern {diagonal!r}; expected one of {DIAGONALS}")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = i + j * (n + 1)
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    if diagonal == "rising":
        rising = np.ones(n * n, dtype=bool)
    elif diagonal == "falling":
        rising = np.zeros(n * n, dtype=bool)
    else:
        rising = (i + j) % 2 == 0
    r = rising[:, None]
    first = np.where(r, np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    second = np.where(r, np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = first
    triangles[1::2] = second
    return Mesh.from_arrays(vertices, triangles)


def entity_geometry(mesh: Mesh, t: int) -> TriangleGeometry:
    """Vertex coordinates, edge data, normals, tangents and barycentric gradients."""
    if not 0 <= t < mesh.n_triangles:
        raise IndexError(f"triangle index {t} out of range")
    return mesh.geometry(t)
