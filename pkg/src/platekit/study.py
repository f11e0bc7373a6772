"""Manufactured solution, error norms and convergence studies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import MethodSpec, SaddleSystem, assemble, l2_project_p1
from .mesh import Mesh, build_uniform_square
from .polyalg import Poly2, TensorPoly2, div_div, hessian
from .quadrature import edge_rule, physical_points, tri_rule
from .solver import SolveReport, solve_saddle

# ||u - u_h|| per method and N (three significant digits)
REFERENCE_TABLE = {
    8: (0.900e-03, 0.871e-03, 0.557e-03, 0.640e-03),
    32: (0.921e-04, 0.426e-04, 0.215e-03, 0.897e-04),
    128: (0.176e-04, 0.130e-04, 0.579e-04, 0.269e-04),
    512: (0.396e-05, 0.326e-05, 0.146e-04, 0.675e-05),
    2048: (0.955e-06, 0.815e-06, 0.361e-05, 0.169e-05),
    8192: (0.236e-06, 0.204e-06, 0.896e-06, 0.424e-06),
}
REFERENCE_COLUMN = {"primal_nodal": 0, "primal_cont": 1, "mixed_hybrid": 2, "mixed_nn": 3}
REFERENCE_TOLERANCE = 0.05

ERROR_FIELDS = (
    "err_u",
    "err_hess",
    "err_M",
    "err_divdiv",
    "err_shear_w",
    "err_nn_w",
    "err_hess_recon",
)
METHOD_FIELDS = {
    "primal_hybrid": ("err_u", "err_hess", "err_shear_w", "err_nn_w"),
    "primal_nodal": ("err_u", "err_hess", "err_shear_w", "err_nn_w"),
    "primal_cont": ("err_u", "err_hess", "err_nn_w"),
    "mixed_hybrid": ("err_u", "err_M", "err_divdiv", "err_hess_recon"),
    "mixed_nn": ("err_u", "err_M", "err_divdiv", "err_hess_recon"),
}
CSV_HEADER = ("method", "N", "h", *ERROR_FIELDS, "eoc_u")


class StudyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    u: Poly2
    m: TensorPoly2
    f: Poly2
    C: np.ndarray = field(default_factory=lambda: np.eye(3))


def manufactured() -> ManufacturedCase:
    """``u = x^2 (1-x)^2 y^2 (1-y)^2`` on the unit square with identity rigidity."""
    one = Poly2.constant(1.0)
    x, y = Poly2.x(), Poly2.y()
    gx = (x * (one - x)) ** 2
    gy = (y * (one - y)) ** 2
    u = gx * gy
    m = hessian(u)
    f = div_div(m)
    lap = u.dx().dx() + u.dy().dy()
    if not f.allclose(lap.dx().dx() + lap.dy().dy()):
        raise StudyError("div div of the Hessian differs from the bilaplacian")
    t = np.linspace(0.0, 1.0, 7)
    for a, b in ((t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)):
        for g in (u, u.dx(), u.dy()):
            if np.max(np.abs(g(a, b))) > 1e-15:
                raise StudyError("manufactured solution is not clamped")
    return ManufacturedCase(u, m, f)


@dataclass
class ErrorRecord:
    method: str
    N: int
    h: float
    err_u: float | None = None
    err_hess: float | None = None
    err_M: float | None = None
    err_divdiv: float | None = None
    err_shear_w: float | None = None
    err_nn_w: float | None = None
    err_hess_recon: float | None = None
    n_unknowns: int | None = None
    residual: float | None = None

    def get(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class Solution:
    system: SaddleSystem
    x: np.ndarray
    report: SolveReport | None = None


def solve(spec: MethodSpec, mesh: Mesh, case: ManufacturedCase | None = None) -> Solution:
    case = case or manufactured()
    system = assemble(spec, mesh, case.f)
    report = solve_saddle(system)
    return Solution(system, report.x, report)


# -- error evaluation -------------------------------------------------------------


def _points(mesh: Mesh, rule):
    P = physical_points(rule, mesh.vertices[mesh.triangles])
    return P[..., 0], P[..., 1]


def _group_eval(system: SaddleSystem, coeffs: np.ndarray, what: str, rule) -> np.ndarray:
    """Evaluate the discrete field at the rule points of every element.

    ``what`` is ``values``, ``hessians`` or ``divdiv``; the result has shape
    ``(nt, nq)`` or ``(nt, nq, 3)``.
    """
    groups = system.groups
    out = None
    for g, tpl in enumerate(groups.templates):
        pts = physical_points(rule, tpl.geom.vertices)
        tab = getattr(tpl, what)(pts)  # (nq, dim) or (nq, dim, 3)
        sel = groups.group == g
        val = np.einsum("td,qd...->tq...", coeffs[sel], tab)
        if out is None:
            out = np.empty((len(groups.group), *val.shape[1:]))
        out[sel] = val
    return out


def _l2(mesh: Mesh, rule, sq: np.ndarray) -> float:
    return float(np.sqrt(np.sum(mesh.areas[:, None] * rule.weights * sq)))


def _frob2(a11, a12, a22):
    return a11**2 + 2.0 * a12**2 + a22**2


def _edge_traces(mesh: Mesh, m: TensorPoly2, rule):
    """Exact ``n.Mn`` and effective shear on every edge w.r.t. the global normal."""
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    L = mesh.edge_lengths
    t = (b - a) / L[:, None]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    P = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    X, Y = P[..., 0], P[..., 1]
    comp = {"11": m.m11, "12": m.m12, "22": m.m22}
    val = {k: p(X, Y) for k, p in comp.items()}
    dx = {k: p.dx()(X, Y) for k, p in comp.items()}
    dy = {k: p.dy()(X, Y) for k, p in comp.items()}
    nx, ny = n[:, 0:1], n[:, 1:2]
    tx, ty = t[:, 0:1], t[:, 1:2]
    nn = nx * nx * val["11"] + 2 * nx * ny * val["12"] + ny * ny * val["22"]
    div1 = dx["11"] + dy["12"]
    div2 = dx["12"] + dy["22"]
    ndiv = nx * div1 + ny * div2

    def tn(d):
        return tx * nx * d["11"] + (tx * ny + ty * nx) * d["12"] + ty * ny * d["22"]

    dt_tn = tx * tn(dx) + ty * tn(dy)
    return L, nn, ndiv + dt_tn


def compute_errors(sol: Solution, case: ManufacturedCase | None = None, only=None) -> ErrorRecord:
    """All error quantities defined for the method (or the subset ``only``)."""
    case = case or manufactured()
    system, x = sol.system, sol.x
    spec, mesh = system.spec, system.mesh
    allowed = METHOD_FIELDS[spec.method]
    wanted = tuple(only) if only is not None else allowed
    bad = [w for w in wanted if w not in allowed]
    if bad:
        raise StudyError(f"{', '.join(bad)} not defined for {spec.method}")
    rule = tri_rule("sixteen_point")
    X, Y = _points(mesh, rule)
    rec = ErrorRecord(spec.method, mesh.n_triangles, mesh.h, n_unknowns=system.n_unknowns)
    if sol.report is not None:
        rec.residual = sol.report.residual
    u, m = case.u, case.m

    if not spec.is_mixed:
        loc = system.field_local(x)
        if "err_u" in wanted:
            uh = _group_eval(system, loc, "values", rule)
            rec.err_u = _l2(mesh, rule, (u(X, Y) - uh) ** 2)
        if "err_hess" in wanted:
            H = _group_eval(system, loc, "hessians", rule)
            d = (u.dx().dx()(X, Y) - H[..., 0], u.dx().dy()(X, Y) - H[..., 1], u.dy().dy()(X, Y) - H[..., 2])
            rec.err_hess = _l2(mesh, rule, _frob2(*d))
        if "err_shear_w" in wanted or "err_nn_w" in wanted:
            erule = edge_rule(5)
            L, nn, shear = _edge_traces(mesh, m, erule)
            xm = x[system.blocks["multiplier"]]
            dofs = system.multiplier.edge_dofs
            if "err_nn_w" in wanted:
                eta = xm[dofs["nn"]][:, None]
                rec.err_nn_w = float(np.sqrt(np.sum(L**2 * ((nn - eta) ** 2 @ erule.weights))))
            if "err_shear_w" in wanted:
                eta = xm[dofs["shear"]][:, None]
                rec.err_shear_w = float(np.sqrt(np.sum(L**4 * ((shear - eta) ** 2 @ erule.weights))))
        return rec

    loc = system.field_local(x)
    if "err_u" in wanted:
        uh = system.deflection_local(x) @ rule.points.T
        rec.err_u = _l2(mesh, rule, (u(X, Y) - uh) ** 2)
    if "err_M" in wanted:
        V = _group_eval(system, loc, "values", rule)
        d = (m.m11(X, Y) - V[..., 0], m.m12(X, Y) - V[..., 1], m.m22(X, Y) - V[..., 2])
        rec.err_M = _l2(mesh, rule, _frob2(*d))
    if "err_divdiv" in wanted:
        dd = _group_eval(system, loc, "divdiv", rule)
        rec.err_divdiv = _l2(mesh, rule, (case.f(X, Y) - dd) ** 2)
    if "err_hess_recon" in wanted:
        eps = strain_of_vertex_gradients(system, x)
        d = (u.dx().dx()(X, Y) - eps[:, 0:1], u.dx().dy()(X, Y) - eps[:, 1:2], u.dy().dy()(X, Y) - eps[:, 2:3])
        rec.err_hess_recon = _l2(mesh, rule, _frob2(*d))
    return rec


def vertex_gradients(system: SaddleSystem, x) -> np.ndarray:
    """Gradient unknowns of the trace variable per vertex (zero on the boundary)."""
    mult = system.multiplier
    xm = np.asarray(x)[system.blocks["multiplier"]]
    G = np.zeros((system.mesh.n_vertices, 2))
    inner = mult.vertex_dofs[:, 0] >= 0
    G[inner] = xm[mult.vertex_dofs[inner, 1:3]]
    return G


def strain_of_vertex_gradients(system: SaddleSystem, x) -> np.ndarray:
    """``eps(G_h)`` per element as ``(xx, xy, yy)``, with ``G_h`` the P1 interpolant."""
    mesh = system.mesh
    G = vertex_gradients(system, x)[mesh.triangles]  # (nt, 3, 2)
    v = mesh.vertices[mesh.triangles]
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of the barycentric coordinates
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (nt, 3, 2)
    J = np.einsum("tja,tjb->tab", G, grads)  # d G_a / d x_b
    return np.column_stack([J[:, 0, 0], 0.5 * (J[:, 0, 1] + J[:, 1, 0]), J[:, 1, 1]])


# -- structural checks -------------------------------------------------------------


def divdiv_projection_gap(sol: Solution, case: ManufacturedCase | None = None) -> float:
    """``||div div M_h - P1 f|| / ||P1 f||`` elementwise for mixed methods."""
    case = case or manufactured()
    system = sol.system
    mesh = system.mesh
    rule = tri_rule("sixteen_point")
    dd = _group_eval(system, system.field_local(sol.x), "divdiv", rule)
    proj = l2_project_p1(case.f, mesh) @ rule.points.T
    return _l2(mesh, rule, (dd - proj) ** 2) / _l2(mesh, rule, proj**2)


def projection_error(f, mesh: Mesh) -> float:
    rule = tri_rule("sixteen_point")
    X, Y = _points(mesh, rule)
    proj = l2_project_p1(f, mesh) @ rule.points.T
    return _l2(mesh, rule, (f(X, Y) - proj) ** 2)


def nn_jump(sol: Solution) -> float:
    """Largest normal-normal trace jump of ``M_h`` across interior edges."""
    system = sol.system
    mesh = system.mesh
    loc = system.field_local(sol.x)
    rule = edge_rule(5)
    worst = 0.0
    inner = np.flatnonzero(~mesh.boundary_edge)
    e0 = mesh.edges[inner]
    a, b = mesh.vertices[e0[:, 0]], mesh.vertices[e0[:, 1]]
    vals = []
    for side in range(2):
        tris = mesh.edge_tris[inner, side]
        out = np.empty((len(inner), len(rule)))
        for i, (t, pa, pb) in enumerate(zip(tris, a, b)):
            space = system.groups.space(mesh, int(t))
            d = pb - pa
            n = np.array([d[1], -d[0]]) / np.hypot(*d)
            P = pa[None, :] + np.outer(rule.points, d)
            V = np.einsum("qdc,d->qc", space.values(P), loc[t])
            out[i] = n[0] ** 2 * V[:, 0] + 2 * n[0] * n[1] * V[:, 1] + n[1] ** 2 * V[:, 2]
        vals.append(out)
    if len(inner):
        worst = float(np.max(np.abs(vals[0] - vals[1])))
    return worst


def jump_orthogonality(sol: Solution) -> float:
    """``max |<d_eta, u_h>_S|`` over multiplier basis functions, relative to ``||B|| ||u_h||``.

    Norms are the maximum row sum of the coupling block and the largest field
    coefficient, which bound every pairing of a field of that size.
    """
    system = sol.system
    K = system.matrix
    B = K[system.blocks["multiplier"], system.blocks["field"]]
    xf = sol.x[system.blocks["field"]]
    r = B @ xf
    scale = float(abs(B).sum(axis=1).max()) * float(np.abs(xf).max())
    return float(np.max(np.abs(r)) / max(scale, 1e-300))


def deflection_l2_difference(a: Solution, b: Solution) -> float:
    """``||u_h^a - u_h^b||`` for two primal solutions on the same mesh."""
    rule = tri_rule("sixteen_point")
    ua = _group_eval(a.system, a.system.field_local(a.x), "values", rule)
    ub = _group_eval(b.system, b.system.field_local(b.x), "values", rule)
    return _l2(a.system.mesh, rule, (ua - ub) ** 2)


# -- convergence tables ------------------------------------------------------------


def eoc(e0, e1, h0, h1) -> float | None:
    if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
        return None
    return math.log(e0 / e1) / math.log(h0 / h1)


@dataclass
class ConvergenceTable:
    spec: MethodSpec
    records: list = field(default_factory=list)

    def eocs(self, name: str) -> list:
        r = self.records
        return [eoc(r[i].get(name), r[i + 1].get(name), r[i].h, r[i + 1].h) for i in range(len(r) - 1)]

    def last_eoc(self, name: str) -> float | None:
        e = self.eocs(name)
        return e[-1] if e else None

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.records]


def check_levels(levels) -> list:
    levels = [int(n) for n in levels]
    if not levels or min(levels) < 1:
        raise ValueError("levels must be positive integers")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double: {a} -> {b}")
    return levels


def run_convergence(
    spec: MethodSpec,
    levels,
    case: ManufacturedCase | None = None,
    diagonal: str = "alternating",
    progress=None,
) -> ConvergenceTable:
    case = case or manufactured()
    table = ConvergenceTable(spec)
    for n in check_levels(levels):
        mesh = build_uniform_square(n, diagonal)
        system = assemble(spec, mesh, case.f, label=f"level n={n}")
        report = solve_saddle(system)
        rec = compute_errors(Solution(system, report.x, report), case)
        table.records.append(rec)
        if progress is not None:
            progress(rec)
    return table


@dataclass(frozen=True)
class ReferenceComparison:
    N: int
    computed: float
    reference: float

    @property
    def deviation(self) -> float:
        return abs(self.computed - self.reference) / self.reference

    @property
    def ok(self) -> bool:
        return self.deviation <= REFERENCE_TOLERANCE


def reference_value(method: str, N: int) -> float | None:
    col = REFERENCE_COLUMN.get(method)
    row = REFERENCE_TABLE.get(N)
    if col is None or row is None:
        return None
    return row[col]


def compare_reference(table: ConvergenceTable) -> list:
    """Relative deviations of ``err_u`` from the embedded reference table."""
    out = []
    for rec in table.records:
        ref = reference_value(table.spec.method, rec.N)
        if ref is not None and rec.err_u is not None:
            out.append(ReferenceComparison(rec.N, rec.err_u, ref))
    return out


def _fmt(v) -> str:
    return "" if v is None else f"{v:.5e}"


def write_csv(table: ConvergenceTable, path, with_reference: bool = False) -> None:
    header = list(CSV_HEADER)
    if with_reference:
        header += ["ref_err_u", "rel_dev_u"]
    eocs = [None, *table.eocs("err_u")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec, e in zip(table.records, eocs):
            row = [rec.method, rec.N, _fmt(rec.h), *(_fmt(rec.get(k)) for k in ERROR_FIELDS), _fmt(e)]
            if with_reference:
                ref = reference_value(rec.method, rec.N)
                dev = None if ref is None or rec.err_u is None else abs(rec.err_u - ref) / ref
                row += [_fmt(ref), _fmt(dev)]
            w.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def record_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ErrorRecord))
