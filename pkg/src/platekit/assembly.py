"""Assembly of the five plate schemes into symmetric saddle-point systems.

Local matrices depend only on the shape of an element (they are invariant
under translation), so they are computed once per congruence class and
scattered with sparse maps.  Tensors are handled in Mandel form
``(m11, m22, sqrt(2) m12)`` so that the Frobenius product is a dot product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import skeleton, traces
from .elements import LocalSpace, hct_trace_matrices, local_space
from .mesh import Mesh
from .quadrature import edge_rule, physical_points, tri_rule

METHODS = ("primal_hybrid", "primal_nodal", "primal_cont", "mixed_hybrid", "mixed_nn")
PRIMAL = METHODS[:3]
MIXED = METHODS[3:]

_FIELD_KIND = {"primal_hybrid": "p3", "primal_nodal": "p3", "primal_cont": "x4b"}
_MULT_KIND = {
    "primal_hybrid": "P0S_pair_plus_corner",
    "primal_nodal": "P0S_pair",
    "primal_cont": "P0S",
    "mixed_hybrid": "HCT_traces",
    "mixed_nn": "HCT_traces_nn",
}
SQRT2 = np.sqrt(2.0)


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    method: str
    full_ddiv: bool = False
    shear_mode: str = "analytic"
    rhs_rule: str = "seven_point"
    C: np.ndarray = field(default_factory=lambda: np.eye(3))  # Mandel form

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        C = np.asarray(self.C, float)
        if C.shape != (3, 3) or not np.allclose(C, C.T):
            raise ValueError("material tensor must be a symmetric 3x3 Mandel matrix")
        if np.linalg.eigvalsh(C).min() <= 0:
            raise ValueError("material tensor must be positive definite")

    @property
    def is_mixed(self) -> bool:
        return self.method in MIXED

    @property
    def field_kind(self) -> str:
        if self.is_mixed:
            return "xddiv15" if self.full_ddiv else "xddiv12"
        return _FIELD_KIND[self.method]

    @property
    def multiplier_kind(self) -> str:
        return _MULT_KIND[self.method]

    @property
    def C_inv(self) -> np.ndarray:
        return np.linalg.inv(np.asarray(self.C, float))


def mandel_from_voigt(c1111, c2222, c1212, c1122=0.0, c1112=0.0, c2212=0.0) -> np.ndarray:
    """Mandel matrix of an orthotropic-style rigidity tensor given by its components."""
    return np.array(
        [
            [c1111, c1122, SQRT2 * c1112],
            [c1122, c2222, SQRT2 * c2212],
            [SQRT2 * c1112, SQRT2 * c2212, 2.0 * c1212],
        ]
    )


def expected_blocks(spec: MethodSpec, mesh: Mesh) -> tuple[int, ...]:
    """Block sizes from the dimension formulas of each scheme."""
    nt, ne = mesh.n_triangles, mesh.n_edges
    ni, nie = mesh.n_interior_vertices, mesh.n_interior_edges
    m = spec.method
    if m == "primal_hybrid":
        return (10 * nt, 2 * ne + 3 * nt - ni)
    if m == "primal_nodal":
        return (ni + 7 * nt, 2 * ne)
    if m == "primal_cont":
        return (ni + 2 * nie + 3 * nt, ne)
    tensor = {
        ("mixed_hybrid", False): 12 * nt,
        ("mixed_hybrid", True): 15 * nt,
        ("mixed_nn", False): ne + 9 * nt,
        ("mixed_nn", True): 2 * ne + 9 * nt,
    }[(m, spec.full_ddiv)]
    return (tensor, 3 * nt, 3 * ni)


# -- element groups ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ElementGroups:
    """Triangles partitioned into congruence classes with one template space each."""

    group: np.ndarray  # (nt,) class index
    templates: list  # LocalSpace per class, anchored at a representative element
    kind: str
    shear_mode: str = "analytic"

    def space(self, mesh: Mesh, t: int) -> LocalSpace:
        return local_space(self.kind, mesh.geometry(t), self.shear_mode)


def element_groups(mesh: Mesh, kind: str, shear_mode: str = "analytic") -> ElementGroups:
    v = mesh.vertices[mesh.triangles]
    off = np.round(v - v.mean(axis=1, keepdims=True), 13) + 0.0
    keys = np.column_stack([off.reshape(-1, 6), mesh.tri_edge_signs])
    _, first, group = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    group = group.reshape(-1)
    templates = [local_space(kind, mesh.geometry(int(t)), shear_mode) for t in first]
    return ElementGroups(group, templates, kind, shear_mode)


def _blockdiag(local: np.ndarray, group: np.ndarray) -> sp.csr_matrix:
    """Block-diagonal matrix with block ``local[group[t]]`` for element ``t``."""
    nt = len(group)
    r, c = local.shape[1:]
    blocks = local[group]  # (nt, r, c)
    rows = (np.arange(nt)[:, None, None] * r + np.arange(r)[None, :, None]) + np.zeros((1, 1, c), int)
    cols = (np.arange(nt)[:, None, None] * c + np.arange(c)[None, None, :]) + np.zeros((1, r, 1), int)
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(nt * r, nt * c))


def _scatter(local_to_global: np.ndarray, n_global: int, weights=None) -> sp.csr_matrix:
    """``Z`` with ``local = Z @ global``; entries -1 mark strongly eliminated dofs."""
    flat = local_to_global.ravel()
    keep = flat >= 0
    w = np.ones(int(keep.sum())) if weights is None else weights.ravel()[keep]
    return sp.csr_matrix(
        (w, (np.flatnonzero(keep), flat[keep])), shape=(flat.size, n_global)
    )


# -- field dof maps -------------------------------------------------------------


def field_dofmap(spec: MethodSpec, mesh: Mesh) -> tuple[np.ndarray, int]:
    """Per-element map of local field dofs to global indices (-1: eliminated)."""
    nt, ne = mesh.n_triangles, mesh.n_edges
    interior_v = ~mesh.boundary_vertex
    vnum = -np.ones(mesh.n_vertices, dtype=np.int64)
    vnum[interior_v] = np.arange(int(interior_v.sum()))
    n_v = int(interior_v.sum())
    m = spec.method

    if m == "primal_hybrid":
        return np.arange(10 * nt).reshape(nt, 10), 10 * nt
    if m == "primal_nodal":
        dm = np.empty((nt, 10), dtype=np.int64)
        dm[:, :3] = vnum[mesh.triangles]
        dm[:, 3:] = n_v + np.arange(7 * nt).reshape(nt, 7)
        return dm, n_v + 7 * nt
    if m == "primal_cont":
        interior_e = ~mesh.boundary_edge
        enum = -np.ones(ne, dtype=np.int64)
        enum[interior_e] = np.arange(int(interior_e.sum()))
        n_e = int(interior_e.sum())
        dm = np.empty((nt, 12), dtype=np.int64)
        dm[:, :3] = vnum[mesh.triangles]
        for k in range(3):
            e = enum[mesh.tri_edges[:, k]]
            for q in range(2):
                dm[:, 3 + 2 * k + q] = np.where(e >= 0, n_v + 2 * e + q, -1)
        dm[:, 9:] = n_v + 2 * n_e + np.arange(3 * nt).reshape(nt, 3)
        return dm, n_v + 2 * n_e + 3 * nt
    # mixed: tensor dofs
    full = spec.full_ddiv
    dim = 15 if full else 12
    if m == "mixed_hybrid":
        return np.arange(dim * nt).reshape(nt, dim), dim * nt
    n_nn = 2 if full else 1
    dm = np.empty((nt, dim), dtype=np.int64)
    private = 9 * nt
    priv = ne * n_nn + np.arange(private).reshape(nt, 9)
    dm[:, :6] = priv[:, :6]
    for k in range(3):
        for q in range(n_nn):
            dm[:, 6 + n_nn * k + q] = n_nn * mesh.tri_edges[:, k] + q
    dm[:, 6 + 3 * n_nn :] = priv[:, 6:]
    return dm, ne * n_nn + private


# -- local matrices ------------------------------------------------------------


def _mandel_hessians(space: LocalSpace, pts) -> np.ndarray:
    H = space.hessians(pts)  # (nq, dim, 3) xx, xy, yy
    return np.stack([H[..., 0], H[..., 2], SQRT2 * H[..., 1]], axis=-1)


def _mandel_values(space: LocalSpace, pts) -> np.ndarray:
    V = space.values(pts)  # (nq, dim, 3) 11, 12, 22
    return np.stack([V[..., 0], V[..., 2], SQRT2 * V[..., 1]], axis=-1)


def local_energy(space: LocalSpace, C: np.ndarray, rule_name: str = "sixteen_point") -> np.ndarray:
    """``(C D^2 v_i, D^2 v_j)_T`` for scalar spaces, ``(C M_i, M_j)_T`` for tensor spaces."""
    rule = tri_rule(rule_name)
    pts = physical_points(rule, space.geom.vertices)
    G = _mandel_values(space, pts) if space.tensor else _mandel_hessians(space, pts)
    A = space.geom.area * np.einsum("q,qia,ab,qjb->ij", rule.weights, G, C, G)
    return 0.5 * (A + A.T)


def local_divdiv_p1(space: LocalSpace, rule_name: str = "sixteen_point") -> np.ndarray:
    """``(div div M_j, lambda_i)_T``: rows barycentric P1 basis, columns tensor basis."""
    rule = tri_rule(rule_name)
    pts = physical_points(rule, space.geom.vertices)
    dd = space.divdiv(pts)  # (nq, dim)
    return space.geom.area * np.einsum("q,qi,qj->ij", rule.weights, rule.points, dd)


def _load_values(space: LocalSpace, rule_name: str) -> np.ndarray:
    """Basis values at the rule points; translation invariant within a group."""
    rule = tri_rule(rule_name)
    return space.values(physical_points(rule, space.geom.vertices))


def load_vector(f, mesh: Mesh, groups: ElementGroups, rule_name: str) -> np.ndarray:
    """``(f, v_i)_T`` for every element, shape ``(nt, dim)``."""
    rule = tri_rule(rule_name)
    P = physical_points(rule, mesh.vertices[mesh.triangles])  # (nt, nq, 2)
    fv = np.asarray(f(P[..., 0], P[..., 1]), float) * mesh.areas[:, None] * rule.weights
    out = np.empty((mesh.n_triangles, groups.templates[0].dim))
    for g, tpl in enumerate(groups.templates):
        sel = groups.group == g
        out[sel] = fv[sel] @ _load_values(tpl, rule_name)
    return out


def p1_load_vector(f, mesh: Mesh, rule_name: str) -> np.ndarray:
    """``(f, lambda_i)_T`` for the barycentric P1 basis, shape ``(nt, 3)``."""
    rule = tri_rule(rule_name)
    P = physical_points(rule, mesh.vertices[mesh.triangles])
    fv = np.asarray(f(P[..., 0], P[..., 1]), float) * mesh.areas[:, None] * rule.weights
    return fv @ rule.points


def l2_project_p1(f, mesh: Mesh, rule_name: str = "sixteen_point") -> np.ndarray:
    """Elementwise L2 projection onto P1, as barycentric nodal coefficients ``(nt, 3)``."""
    b = p1_load_vector(f, mesh, rule_name)
    gram = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return np.linalg.solve(gram, (b / mesh.areas[:, None]).T).T


# -- system -----------------------------------------------------------------


@dataclass(eq=False)
class SaddleSystem:
    spec: MethodSpec
    mesh: Mesh
    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: dict  # name -> slice
    groups: ElementGroups
    field_map: np.ndarray  # (nt, dim_local) -> global field index or -1
    Z: sp.csr_matrix  # field scatter
    multiplier: skeleton.MultiplierSpace
    label: str = ""

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(s.stop - s.start for s in self.blocks.values())

    def split(self, x) -> dict:
        return {name: np.asarray(x)[s] for name, s in self.blocks.items()}

    def field_local(self, x) -> np.ndarray:
        """Local field coefficients ``(nt, dim)`` of a global solution vector."""
        xf = np.asarray(x)[self.blocks["field"]]
        return (self.Z @ xf).reshape(self.mesh.n_triangles, -1)

    def multiplier_slots(self, x) -> np.ndarray:
        return self.multiplier.slot_values(np.asarray(x)[self.blocks["multiplier"]])

    def deflection_local(self, x) -> np.ndarray:
        """Barycentric P1 coefficients of the mixed deflection ``(nt, 3)``."""
        return np.asarray(x)[self.blocks["deflection"]].reshape(-1, 3)


def _symmetric_from_blocks(A, B_list, sizes) -> sp.csr_matrix:
    n = sum(sizes)
    offs = np.cumsum([0, *sizes])
    rows, cols, vals = [], [], []

    def add(M, r0, c0):
        M = M.tocoo()
        rows.append(M.row + r0)
        cols.append(M.col + c0)
        vals.append(M.data)

    add(A, 0, 0)
    for i, B in enumerate(B_list):
        add(B, offs[i + 1], 0)
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    K.sum_duplicates()
    lower = sp.tril(K, format="csr")
    # mirror the lower triangle so that (i, j) and (j, i) are bitwise equal
    return (lower + sp.tril(lower, k=-1, format="csr").T).tocsr()


def assemble(spec: MethodSpec, mesh: Mesh, f, label: str = "") -> SaddleSystem:
    """Assemble the saddle-point system of ``spec.method`` on ``mesh`` for the load ``f``."""
    groups = element_groups(mesh, spec.field_kind, spec.shear_mode)
    dm, n_field = field_dofmap(spec, mesh)
    Z = _scatter(dm, n_field)
    mult = skeleton.build_multiplier(spec.multiplier_kind, mesh)
    C = np.asarray(spec.C, float)
    g = groups.group

    if not spec.is_mixed:
        A_loc = np.array([local_energy(t, C) for t in groups.templates])
        B_loc = np.array([skeleton.pair_primal(mult.kind, t) for t in groups.templates])
        A = Z.T @ _blockdiag(A_loc, g) @ Z
        B = mult.Q.T @ _blockdiag(B_loc, g) @ Z
        b_field = Z.T @ load_vector(f, mesh, groups, spec.rhs_rule).ravel()
        sizes = (n_field, mult.dim)
        K = _symmetric_from_blocks(A, [B], sizes)
        rhs = np.concatenate([b_field, np.zeros(mult.dim)])
        names = ("field", "multiplier")
    else:
        Cinv = spec.C_inv
        A_loc = np.array([local_energy(t, Cinv) for t in groups.templates])
        D_loc = np.array([local_divdiv_p1(t) for t in groups.templates])
        P_loc = np.array(
            [skeleton.pair_mixed(mult.kind, t, spec.shear_mode) for t in groups.templates]
        )
        A = Z.T @ _blockdiag(A_loc, g) @ Z
        B1 = -(_blockdiag(D_loc, g) @ Z)
        B2 = -(mult.Q.T @ _blockdiag(P_loc, g) @ Z)
        nt = mesh.n_triangles
        sizes = (n_field, 3 * nt, mult.dim)
        K = _symmetric_from_blocks(A, [B1, B2], sizes)
        rhs = np.concatenate(
            [np.zeros(n_field), -p1_load_vector(f, mesh, spec.rhs_rule).ravel(), np.zeros(mult.dim)]
        )
        names = ("field", "deflection", "multiplier")

    want = expected_blocks(spec, mesh)
    if tuple(sizes) != want:
        raise AssemblyError(f"{spec.method}: block sizes {sizes} differ from the formulas {want}")
    offs = np.cumsum([0, *sizes])
    blocks = {nm: slice(int(offs[i]), int(offs[i + 1])) for i, nm in enumerate(names)}
    return SaddleSystem(spec, mesh, K, rhs, blocks, groups, dm, Z, mult, label)


# -- consistency with exact data ------------------------------------------------


def consistency_residuals(spec: MethodSpec, mesh: Mesh, u, m, f, rule_name="high_order") -> dict:
    """Residuals of the discrete equations with the exact fields inserted.

    ``u`` is the exact deflection, ``m`` the exact moment tensor and ``f`` the
    load.  Domain terms use ``rule_name``; skeleton terms take the exact
    traces of ``u`` and ``m``.  Each entry is the residual norm divided by the
    largest norm of the terms that make it up.
    """
    groups = element_groups(mesh, spec.field_kind, spec.shear_mode)
    dm, n_field = field_dofmap(spec, mesh)
    Z = _scatter(dm, n_field)
    mult = skeleton.build_multiplier(spec.multiplier_kind, mesh)
    rule = tri_rule(rule_name)
    nt = mesh.n_triangles
    out = {}

    def rel(total, *terms):
        scale = max(np.linalg.norm(np.ravel(t)) for t in terms)
        return float(np.linalg.norm(total) / scale) if scale > 0 else 0.0

    if not spec.is_mixed:
        C = np.asarray(spec.C, float)
        hess = [u.dx().dx(), u.dx().dy(), u.dy().dy()]
        energy = np.empty((nt, groups.templates[0].dim))
        pairing = np.empty_like(energy)
        slots = np.zeros((nt, skeleton.N_SLOTS))
        for t in range(nt):
            space = local_space(spec.field_kind, mesh.geometry(t))
            geom = space.geom
            pts = physical_points(rule, geom.vertices)
            Hu = np.stack([h(pts[:, 0], pts[:, 1]) for h in hess], axis=-1)
            Mu = np.stack([Hu[:, 0], Hu[:, 2], SQRT2 * Hu[:, 1]], axis=-1) @ C.T
            energy[t] = geom.area * np.einsum("q,qa,qia->i", rule.weights, Mu, _mandel_hessians(space, pts))
            pairing[t] = skeleton.pair_primal_exact(m, space)
            slots[t] = _primal_slots_of(u, geom)
        load = load_vector(f, mesh, groups, rule_name)
        e, p, b = (Z.T @ a.ravel() for a in (energy, pairing, load))
        out["field"] = rel(e + p - b, e, p, b)
        out["multiplier"] = rel(mult.Q.T @ slots.ravel(), mult.Q.T @ np.abs(slots).ravel(), slots)
        return out

    Cinv = spec.C_inv
    comps = [m.m11, m.m22, m.m12]
    energy = np.empty((nt, groups.templates[0].dim))
    udd = np.empty_like(energy)
    pairing = np.empty_like(energy)
    hct = np.zeros((nt, skeleton.N_SLOTS))
    for t in range(nt):
        space = local_space(spec.field_kind, mesh.geometry(t), spec.shear_mode)
        geom = space.geom
        pts = physical_points(rule, geom.vertices)
        Mv = np.stack([c(pts[:, 0], pts[:, 1]) for c in comps], axis=-1)
        Mv[:, 2] *= SQRT2
        w = geom.area * rule.weights
        energy[t] = np.einsum("q,qa,ab,qib->i", w, Mv, Cinv, _mandel_values(space, pts))
        udd[t] = (w * u(pts[:, 0], pts[:, 1])) @ space.divdiv(pts)
        pairing[t] = skeleton.pair_mixed_exact(u, space, mult.kind)
        hct[t] = _hct_slots_of(m, geom, mult.kind)
    e, d, p = (Z.T @ a.ravel() for a in (energy, udd, pairing))
    out["field"] = rel(e - d - p, e, d, p)
    ddm = m.m11.dx().dx() + m.m12.dx().dy() * 2.0 + m.m22.dy().dy()
    lhs = -p1_load_vector(ddm, mesh, rule_name).ravel()
    rhs = -p1_load_vector(f, mesh, rule_name).ravel()
    out["deflection"] = rel(lhs - rhs, lhs, rhs)
    out["multiplier"] = rel(mult.Q.T @ hct.ravel(), mult.Q.T @ np.abs(hct).ravel(), hct)
    return out


def _primal_slots_of(u, geom, n_edge_points: int = 8) -> np.ndarray:
    """Slot pairings ``[s |E| int u, -|E| int d_n u, -u(x)]`` of a smooth deflection."""
    rule = edge_rule(n_edge_points)
    ux, uy = u.dx(), u.dy()
    out = np.zeros(skeleton.N_SLOTS)
    for k in range(3):
        a, b = geom.edge_endpoints(k)
        p = a[None, :] + np.outer(rule.points, b - a)
        L, n = geom.edge_lengths[k], geom.normals[k]
        out[k] = geom.signs[k] * L * rule.weights @ u(p[:, 0], p[:, 1])
        out[3 + k] = -L * rule.weights @ (ux(p[:, 0], p[:, 1]) * n[0] + uy(p[:, 0], p[:, 1]) * n[1])
    out[6:] = -u(geom.vertices[:, 0], geom.vertices[:, 1])
    return out


def _hct_slots_of(m, geom, kind: str, n_edge_points: int = 8) -> np.ndarray:
    """Pairing of a smooth tensor with the nine HCT trace basis functions of one element."""
    rule = edge_rule(n_edge_points)
    vec, c, s, deg = traces._tensor_vector(m)
    out = np.zeros(skeleton.N_SLOTS)
    for k in range(3):
        a, b = geom.edge_endpoints(k)
        p = a[None, :] + np.outer(rule.points, b - a)
        L, n, t = geom.edge_lengths[k], geom.normals[k], geom.tangents[k]
        val, dn = hct_trace_matrices(geom, k, rule.points)
        shear = traces.shear_rows(p, n, t, c, s, deg) @ vec
        out -= L * (rule.weights * shear) @ val
        if kind == "HCT_traces":
            out += L * (rule.weights * (traces.nn_rows(p, n, c, s, deg) @ vec)) @ dn
    for j in range(3):
        out[3 * j] += traces.corner_jump(m, geom, j)
    return out


# -- export ----------------------------------------------------------------------


def export_matrix(system: SaddleSystem, path) -> int:
    """Write ``row col value`` lines (0-based, 17 significant digits); returns the entry count."""
    K = system.matrix.tocoo()
    order = np.lexsort((K.col, K.row))
    lines = [f"{r} {c} {v:.17g}" for r, c, v in zip(K.row[order], K.col[order], K.data[order])]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
    return len(lines)
