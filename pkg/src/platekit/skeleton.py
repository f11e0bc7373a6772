"""Multiplier spaces on the mesh skeleton and the trace pairings that couple them to fields.

Every multiplier space is described by a sparse map ``Q`` from its global
coefficients to per-element *slots*.  Primal spaces use nine slots per
element, ``[sf_0, sf_1, sf_2, nn_0, nn_1, nn_2, c_0, c_1, c_2]`` (shear and
normal-normal value on local edge ``k``, corner force at local vertex ``j``);
trace spaces of the mixed methods use the nine HCT vertex data
``[v_0, gx_0, gy_0, v_1, ...]``.  Local pairing matrices act on those slots,
so a global coupling block is ``Q.T @ blockdiag(B_T) @ Z`` with ``Z`` the
field scatter map.

Shear values are stored once per edge with respect to the global normal (the
clockwise rotation of the global tangent) and enter an element with its edge
sign.  Normal-normal values need no sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import traces
from .elements import LocalSpace, hct_trace_matrices
from .mesh import Mesh, TriangleGeometry
from .quadrature import edge_rule
from .traces import corner_jump, nn_trace, shear_trace  # noqa: F401  (re-exported)

PRIMAL_KINDS = ("P0S_pair_plus_corner", "P0S_pair", "P0S")
MIXED_KINDS = ("HCT_traces", "HCT_traces_nn")
KINDS = PRIMAL_KINDS + MIXED_KINDS

SLOT_SHEAR = (0, 1, 2)
SLOT_NN = (3, 4, 5)
SLOT_CORNER = (6, 7, 8)
N_SLOTS = 9


class PairingError(ValueError):
    """Raised when a multiplier kind is paired with the wrong field space."""


@dataclass(frozen=True, eq=False)
class MultiplierSpace:
    kind: str
    dim: int
    Q: sp.csr_matrix  # (9 * n_triangles, dim): global coefficients -> element slots
    edge_dofs: dict  # component name -> (n_edges,) global index or -1
    vertex_dofs: np.ndarray | None  # (n_vertices, 3) for trace spaces, -1 on the boundary
    corner_basis: sp.csr_matrix | None  # (3 * n_triangles, n_corner) constrained corner basis

    @property
    def is_primal(self) -> bool:
        return self.kind in PRIMAL_KINDS

    def slot_values(self, coeffs) -> np.ndarray:
        """Per-element slot values ``(n_triangles, 9)`` of a global coefficient vector."""
        return (self.Q @ np.asarray(coeffs, float)).reshape(-1, N_SLOTS)


def expected_dimension(kind: str, mesh: Mesh) -> int:
    ne, nt, ni = mesh.n_edges, mesh.n_triangles, mesh.n_interior_vertices
    return {
        "P0S_pair_plus_corner": 2 * ne + 3 * nt - ni,
        "P0S_pair": 2 * ne,
        "P0S": ne,
        "HCT_traces": 3 * ni,
        "HCT_traces_nn": 3 * ni,
    }[kind]


def constrained_corner_basis(mesh: Mesh) -> sp.csr_matrix:
    """Basis of corner values summing to zero around each interior vertex.

    Slot ``3 t + j`` is the corner of triangle ``t`` at local vertex ``j``.
    At an interior vertex with slots ``s_0, ..., s_m`` the basis vectors are
    ``e_{s_i} - e_{s_0}``; boundary-vertex slots stay free.
    """
    rows, cols, vals = [], [], []
    col = 0
    for v, slots in enumerate(mesh.vertex_triangles()):
        ids = [3 * t + j for t, j in slots]
        if mesh.boundary_vertex[v]:
            for s in ids:
                rows.append(s)
                cols.append(col)
                vals.append(1.0)
                col += 1
        else:
            for s in ids[1:]:
                rows += [s, ids[0]]
                cols += [col, col]
                vals += [1.0, -1.0]
                col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(3 * mesh.n_triangles, col))


def build_multiplier(kind: str, mesh: Mesh) -> MultiplierSpace:
    if kind not in KINDS:
        raise ValueError(f"unknown multiplier kind {kind!r}; expected one of {KINDS}")
    nt, ne = mesh.n_triangles, mesh.n_edges
    tri = np.arange(nt)
    rows, cols, vals = [], [], []
    edge_dofs: dict = {}
    vertex_dofs = None
    corner = None
    offset = 0

    if kind in PRIMAL_KINDS:
        components = ["nn"] if kind == "P0S" else ["shear", "nn"]
        for comp in components:
            gidx = offset + np.arange(ne)
            edge_dofs[comp] = gidx
            base = SLOT_SHEAR[0] if comp == "shear" else SLOT_NN[0]
            for k in range(3):
                rows.append(N_SLOTS * tri + base + k)
                cols.append(gidx[mesh.tri_edges[:, k]])
                vals.append(np.ones(nt))
            offset += ne
        if kind == "P0S_pair_plus_corner":
            corner = constrained_corner_basis(mesh)
            c = corner.tocoo()
            t, j = np.divmod(c.row, 3)
            rows.append(N_SLOTS * t + SLOT_CORNER[0] + j)
            cols.append(offset + c.col)
            vals.append(c.data)
            offset += corner.shape[1]
    else:
        interior = ~mesh.boundary_vertex
        vertex_dofs = -np.ones((mesh.n_vertices, 3), dtype=np.int64)
        vertex_dofs[interior] = np.arange(3 * int(interior.sum())).reshape(-1, 3)
        for j in range(3):
            g = vertex_dofs[mesh.triangles[:, j]]
            for c in range(3):
                keep = g[:, c] >= 0
                rows.append(N_SLOTS * tri[keep] + 3 * j + c)
                cols.append(g[keep, c])
                vals.append(np.ones(int(keep.sum())))
        offset = 3 * int(interior.sum())

    Q = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N_SLOTS * nt, offset),
    )
    space = MultiplierSpace(kind, offset, Q, edge_dofs, vertex_dofs, corner)
    if space.dim != expected_dimension(kind, mesh):
        raise AssertionError(
            f"{kind}: built {space.dim} dofs, formula gives {expected_dimension(kind, mesh)}"
        )
    return space


# -- local pairings -------------------------------------------------------------


def _edge_points(geom: TriangleGeometry, k: int, tau) -> np.ndarray:
    a, b = geom.edge_endpoints(k)
    return a[None, :] + np.outer(tau, b - a)


def _check_primal(kind: str, space: LocalSpace) -> None:
    if kind not in PRIMAL_KINDS:
        raise PairingError(f"{kind} is not a primal multiplier kind")
    if space.tensor:
        raise PairingError("primal multipliers pair with scalar fields")
    want = "x4b" if kind == "P0S" else "p3"
    if space.name != want:
        raise PairingError(f"{kind} pairs with the {want} field, got {space.name}")


def pair_primal(kind: str, space: LocalSpace, n_edge_points: int = 5) -> np.ndarray:
    """Slot-by-field pairing matrix ``(9, dim)`` of one element.

    For unit slot values: shear row ``k`` is ``s_k |E_k| int v``, nn row ``k``
    is ``-|E_k| int d_n v`` and corner row ``j`` is ``-v(x_j)``, where ``s_k``
    is the element's edge sign.
    """
    _check_primal(kind, space)
    geom = space.geom
    rule = edge_rule(n_edge_points)
    out = np.zeros((N_SLOTS, space.dim))
    for k in range(3):
        pts = _edge_points(geom, k, rule.points)
        L = geom.edge_lengths[k]
        val = space.values(pts)
        dn = space.gradients(pts) @ geom.normals[k]
        out[SLOT_SHEAR[k]] = geom.signs[k] * L * (rule.weights @ val)
        out[SLOT_NN[k]] = -L * (rule.weights @ dn)
    out[list(SLOT_CORNER)] = -space.values(geom.vertices)
    return out


def pair_primal_exact(m, space: LocalSpace, n_edge_points: int = 8) -> np.ndarray:
    """Pairing ``<gamma(M), v>`` of a smooth tensor polynomial with every basis member.

    Uses the element-outward shear, the nn trace and the corner jumps of ``m``
    directly, so the result is what the multiplier block sees for exact traces.
    """
    geom = space.geom
    rule = edge_rule(n_edge_points)
    vec, center, scale, deg = traces._tensor_vector(m)
    out = np.zeros(space.dim)
    for k in range(3):
        pts = _edge_points(geom, k, rule.points)
        L = geom.edge_lengths[k]
        n, t = geom.normals[k], geom.tangents[k]
        shear = traces.shear_rows(pts, n, t, center, scale, deg) @ vec
        nn = traces.nn_rows(pts, n, center, scale, deg) @ vec
        val = space.values(pts)
        dn = space.gradients(pts) @ n
        out += L * ((rule.weights * shear) @ val - (rule.weights * nn) @ dn)
    vals = space.values(geom.vertices)
    for j in range(3):
        out -= corner_jump(m, geom, j) * vals[j]
    return out


def _check_mixed(kind: str, space: LocalSpace) -> None:
    if kind not in MIXED_KINDS:
        raise PairingError(f"{kind} is not a trace kind of the mixed methods")
    if not space.tensor:
        raise PairingError("trace multipliers pair with tensor fields")


def pair_mixed(
    kind: str, space: LocalSpace, shear_mode: str = "analytic", n_edge_points: int = 5
) -> np.ndarray:
    """HCT-slot-by-tensor pairing matrix ``(9, dim)`` of one element.

    Row ``3 j + c`` is vertex datum ``c`` (value, d_x, d_y) of local vertex
    ``j``.  The pairing is ``<n.Mn, d_n psi> - <shear, psi> + sum_x [t.Mn](x) psi(x)``;
    ``HCT_traces_nn`` omits the normal-normal term.
    """
    _check_mixed(kind, space)
    geom = space.geom
    rule = edge_rule(n_edge_points)
    c, s = space.center, space.scale
    out = np.zeros((N_SLOTS, space.dim))
    for k in range(3):
        pts = _edge_points(geom, k, rule.points)
        L = geom.edge_lengths[k]
        n, t = geom.normals[k], geom.tangents[k]
        step = traces.CENTRAL_STEP * L
        val, dn = hct_trace_matrices(geom, k, rule.points)
        shear = traces.shear_rows(pts, n, t, c, s, space.degree, shear_mode, step) @ space.coeffs
        out -= L * (val.T * rule.weights) @ shear
        if kind == "HCT_traces":
            nn = traces.nn_rows(pts, n, c, s, space.degree) @ space.coeffs
            out += L * (dn.T * rule.weights) @ nn
    for j in range(3):
        out[3 * j] += traces.corner_jump_rows(geom, j, c, s, space.degree)[0] @ space.coeffs
    return out


def pair_mixed_exact(u, space: LocalSpace, kind: str = "HCT_traces", n_edge_points: int = 8):
    """``<gamma_2(u), M>`` of a smooth scalar polynomial against every tensor basis member."""
    _check_mixed(kind, space)
    geom = space.geom
    rule = edge_rule(n_edge_points)
    c, s = space.center, space.scale
    ux, uy = u.dx(), u.dy()
    out = np.zeros(space.dim)
    for k in range(3):
        pts = _edge_points(geom, k, rule.points)
        L = geom.edge_lengths[k]
        n, t = geom.normals[k], geom.tangents[k]
        uval = u(pts[:, 0], pts[:, 1])
        shear = traces.shear_rows(pts, n, t, c, s, space.degree) @ space.coeffs
        out -= L * (rule.weights * uval) @ shear
        if kind == "HCT_traces":
            udn = ux(pts[:, 0], pts[:, 1]) * n[0] + uy(pts[:, 0], pts[:, 1]) * n[1]
            nn = traces.nn_rows(pts, n, c, s, space.degree) @ space.coeffs
            out += L * (rule.weights * udn) @ nn
    for j in range(3):
        x = geom.vertices[j]
        out += float(u(x[0], x[1])) * (
            traces.corner_jump_rows(geom, j, c, s, space.degree)[0] @ space.coeffs
        )
    return out


__all__ = [
    "KINDS",
    "MultiplierSpace",
    "PairingError",
    "build_multiplier",
    "constrained_corner_basis",
    "corner_jump",
    "expected_dimension",
    "nn_trace",
    "pair_mixed",
    "pair_mixed_exact",
    "pair_primal",
    "pair_primal_exact",
    "shear_trace",
]
