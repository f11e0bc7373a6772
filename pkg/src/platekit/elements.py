"""Local finite element spaces as dof-dual polynomial bases on physical triangles.

Every space stores the coefficient matrix of its basis in the element's local
monomial frame (centroid, size ``sqrt(2 |T|)``).  Edge moments are taken in
the normalized parameter ``t`` in ``[0, 1]`` that follows the *global* edge
orientation, against ``phi_0 = 1`` and ``phi_1 = 2 t - 1``, so that shared
edge dofs agree from both sides.

Spaces
------
``p3``        cubic polynomials, 10 dofs (vertex values, 2 value moments per
              edge, interior mean)
``x4b``       cubics plus quartic bubbles, 12 dofs (vertex values, 2 value
              moments and 1 normal-derivative moment per edge)
``xddiv15``   ``sym(RT0 (x) RT1)``, 15 dofs (2 shear and 2 normal-normal
              moments per edge, 3 corner jumps)
``xddiv12``   the subspace with edgewise constant normal-normal traces
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import traces
from .mesh import TriangleGeometry, triangle_geometry
from .polyalg import Poly2, TensorPoly2, n_monomials, vandermonde
from .quadrature import edge_rule, tri_rule


class UnisolvenceError(RuntimeError):
    """Raised when dof functionals fail to determine the local space."""


@dataclass(frozen=True, eq=False)
class LocalSpace:
    name: str
    dim: int
    degree: int
    tensor: bool
    coeffs: np.ndarray  # (ncomp * nmon, dim)
    dof_rows: np.ndarray  # (dim, ncomp * nmon), frame-independent functionals
    dof_labels: tuple[str, ...]
    geom: TriangleGeometry
    center: np.ndarray
    scale: float

    def dof_matrix(self) -> np.ndarray:
        """``D[i, j] = dof_i(basis_j)``; the identity for a dof-dual basis."""
        return self.dof_rows @ self.coeffs

    # -- members ----------------------------------------------------------
    def member(self, j: int):
        return self.combine(np.eye(self.dim)[j])

    def combine(self, weights) -> Poly2 | TensorPoly2:
        vec = self.coeffs @ np.asarray(weights, float)
        mk = lambda v: Poly2.from_vector(v, self.degree, self.center, self.scale)  # noqa: E731
        if not self.tensor:
            return mk(vec)
        nm = n_monomials(self.degree)
        return TensorPoly2(mk(vec[:nm]), mk(vec[nm : 2 * nm]), mk(vec[2 * nm :]))

    def dofs_of(self, fn: Poly2 | TensorPoly2) -> np.ndarray:
        """Apply the dof functionals to a polynomial of degree <= ``self.degree``."""
        c, s = tuple(self.center), self.scale
        if self.tensor:
            parts = [p.reframe(c, s).to_vector(self.degree) for p in (fn.m11, fn.m12, fn.m22)]
            return self.dof_rows @ np.concatenate(parts)
        return self.dof_rows @ fn.reframe(c, s).to_vector(self.degree)

    def interpolate(self, fn) -> np.ndarray:
        """Coefficients (in this basis) of the dof interpolant of ``fn``."""
        return self.dofs_of(fn)

    # -- tabulation -------------------------------------------------------
    def values(self, points) -> np.ndarray:
        """``(npts, dim)`` for scalars, ``(npts, dim, 3)`` with ``(11, 12, 22)`` for tensors."""
        V = traces.value_rows(points, self.center, self.scale, self.degree)
        if not self.tensor:
            return V @ self.coeffs
        nm = V.shape[1]
        return np.stack([V @ self.coeffs[i * nm : (i + 1) * nm] for i in range(3)], axis=-1)

    def gradients(self, points) -> np.ndarray:
        gx, gy = traces.gradient_rows(points, self.center, self.scale, self.degree)
        return np.stack([gx @ self.coeffs, gy @ self.coeffs], axis=-1)

    def hessians(self, points) -> np.ndarray:
        """Scalar spaces: ``(npts, dim, 3)`` with ``(xx, xy, yy)``."""
        rows = traces.hessian_rows(points, self.center, self.scale, self.degree)
        return np.stack([r @ self.coeffs for r in rows], axis=-1)

    def divdiv(self, points) -> np.ndarray:
        return traces.divdiv_rows(points, self.center, self.scale, self.degree) @ self.coeffs


# -- dof functional rows ------------------------------------------------------


def _edge_points(geom: TriangleGeometry, k: int, tq: np.ndarray) -> np.ndarray:
    a, b = geom.global_endpoints(k)
    return a[None, :] + np.outer(tq, b - a)


def _edge_moment_rows(geom, k, row_fn, n_moments=2):
    """Moments ``int_0^1 f(t) phi_m(t) dt`` in the global edge parameter."""
    rule = edge_rule(5)
    pts = _edge_points(geom, k, rule.points)
    R = row_fn(pts)
    phis = [np.ones_like(rule.points), 2.0 * rule.points - 1.0][:n_moments]
    return [(rule.weights * phi) @ R for phi in phis]


def _scalar_dof_rows(geom, center, scale, degree, with_interior, with_dn):
    rows, labels = [], []
    V = traces.value_rows(geom.vertices, center, scale, degree)
    for j in range(3):
        rows.append(V[j])
        labels.append(f"value@v{j}")
    for k in range(3):
        rows += _edge_moment_rows(geom, k, lambda p: traces.value_rows(p, center, scale, degree))
        labels += [f"moment0@e{k}", f"moment1@e{k}"]
    if with_dn:
        for k in range(3):
            n = geom.normals[k]

            def dn(p, n=n):
                gx, gy = traces.gradient_rows(p, center, scale, degree)
                return n[0] * gx + n[1] * gy

            rows += _edge_moment_rows(geom, k, dn, 1)
            labels.append(f"dn_moment@e{k}")
    if with_interior:
        rule = tri_rule("sixteen_point")
        pts = rule.points @ geom.vertices
        rows.append(rule.weights @ traces.value_rows(pts, center, scale, degree))
        labels.append("mean")
    return np.array(rows), tuple(labels)


def _tensor_dof_rows(geom, center, scale, shear_mode, nn_moments):
    deg = 3
    rows, labels = [], []
    for k in range(3):
        n, t = geom.normals[k], geom.tangents[k]
        step = traces.CENTRAL_STEP * geom.edge_lengths[k]
        rows += _edge_moment_rows(
            geom,
            k,
            lambda p, n=n, t=t, step=step: traces.shear_rows(
                p, n, t, center, scale, deg, shear_mode, step
            ),
        )
        labels += [f"shear0@e{k}", f"shear1@e{k}"]
    nn_lin = []
    for k in range(3):
        n = geom.normals[k]
        m0, m1 = _edge_moment_rows(geom, k, lambda p, n=n: traces.nn_rows(p, n, center, scale, deg))
        rows.append(m0)
        labels.append(f"nn0@e{k}")
        if nn_moments == 2:
            rows.append(m1)
            labels.append(f"nn1@e{k}")
        nn_lin.append(m1)
    for j in range(3):
        rows.append(traces.corner_jump_rows(geom, j, center, scale, deg)[0])
        labels.append(f"corner@v{j}")
    return np.array(rows), tuple(labels), np.array(nn_lin)


# -- span construction -----------------------------------------------------


def _bary_poly(geom, k, center, scale) -> Poly2:
    g = geom.grad_lambda[k]
    c0 = 1.0 / 3.0 + g @ (np.asarray(center) - geom.centroid)
    return Poly2([[c0, scale * g[1]], [scale * g[0], 0.0]], center, scale)


def _x4b_span(geom, center, scale) -> np.ndarray:
    nm = n_monomials(4)
    span = np.zeros((nm, 12))
    span[: n_monomials(3), :10] = np.eye(10)
    lam = [_bary_poly(geom, k, center, scale) for k in range(3)]
    bubble = lam[0] * lam[1] * lam[2]
    span[:, 10] = (lam[0] * bubble).to_vector(4)
    span[:, 11] = (lam[1] * bubble).to_vector(4)
    return span


@lru_cache(maxsize=None)
def xddiv_raw_span() -> np.ndarray:
    """Orthonormal coefficient basis of ``sym(RT0 (x) RT1)`` in local coordinates.

    RT spaces are invariant under translation and dilation, so the span is the
    same in every element frame.  Raises if the rank is not 15.
    """
    one = Poly2.constant(1.0)
    zero = Poly2.constant(0.0)
    x, y = Poly2.x(), Poly2.y()
    rt0 = [(one, zero), (zero, one), (x, y)]
    rt1 = [
        (one, zero), (x, zero), (y, zero),
        (zero, one), (zero, x), (zero, y),
        (x * x, x * y), (x * y, y * y),
    ]  # fmt: skip
    cols = []
    for p in rt0:
        for q in rt1:
            m11 = p[0] * q[0]
            m22 = p[1] * q[1]
            m12 = (p[0] * q[1] + p[1] * q[0]) * 0.5
            cols.append(np.concatenate([m.to_vector(3) for m in (m11, m12, m22)]))
    A = np.array(cols).T  # (30, 24)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank != 15:
        raise UnisolvenceError(
            f"sym(RT0 x RT1) span has rank {rank}, expected 15; singular values {s}"
        )
    return U[:, :rank]


def _dual(span: np.ndarray, rows: np.ndarray, name: str) -> np.ndarray:
    D = rows @ span
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or cond > 1e12:
        raise UnisolvenceError(f"{name}: dof matrix is singular (cond={cond:.3e})")
    return span @ np.linalg.inv(D)


# -- public constructors ----------------------------------------------------


def _frame(geom):
    return geom.centroid, geom.scale


def p3_space(geom: TriangleGeometry) -> LocalSpace:
    center, scale = _frame(geom)
    rows, labels = _scalar_dof_rows(geom, center, scale, 3, with_interior=True, with_dn=False)
    coeffs = _dual(np.eye(10), rows, "P3")
    return LocalSpace("p3", 10, 3, False, coeffs, rows, labels, geom, center, scale)


def x4b_space(geom: TriangleGeometry) -> LocalSpace:
    center, scale = _frame(geom)
    rows, labels = _scalar_dof_rows(geom, center, scale, 4, with_interior=False, with_dn=True)
    coeffs = _dual(_x4b_span(geom, center, scale), rows, "X4b")
    return LocalSpace("x4b", 12, 4, False, coeffs, rows, labels, geom, center, scale)


def xddiv_space(
    geom: TriangleGeometry, variant: str = "reduced12", shear_mode: str = "analytic"
) -> LocalSpace:
    """Tensor element ``sym(RT0 (x) RT1)`` (``full15``) or its nn-constant subspace."""
    center, scale = _frame(geom)
    span = xddiv_raw_span()
    if variant == "full15":
        rows, labels, _ = _tensor_dof_rows(geom, center, scale, shear_mode, 2)
        coeffs = _dual(span, rows, "XdDiv(15)")
        return LocalSpace("xddiv15", 15, 3, True, coeffs, rows, labels, geom, center, scale)
    if variant == "reduced12":
        rows, labels, nn_lin = _tensor_dof_rows(geom, center, scale, shear_mode, 1)
        C = nn_lin @ span
        _, s, vt = np.linalg.svd(C)
        if np.sum(s > 1e-10 * max(s[0], 1.0)) != 3:
            raise UnisolvenceError("normal-normal constraints are rank deficient")
        sub = span @ vt[3:].T
        coeffs = _dual(sub, rows, "XdDiv,nnc(12)")
        return LocalSpace("xddiv12", 12, 3, True, coeffs, rows, labels, geom, center, scale)
    raise ValueError(f"unknown X^dDiv variant {variant!r}")


def nn_linear_moment_rows(space: LocalSpace) -> np.ndarray:
    """Rows of ``<n.Mn, 2t - 1>_E`` per edge for a tensor space (used in checks)."""
    geom = space.geom
    out = []
    for k in range(3):
        n = geom.normals[k]
        out.append(
            _edge_moment_rows(
                geom, k, lambda p, n=n: traces.nn_rows(p, n, space.center, space.scale, 3)
            )[1]
        )
    return np.array(out)


# -- HCT boundary data -------------------------------------------------------


def hermite_basis(tau) -> np.ndarray:
    """Cubic Hermite basis on ``[0, 1]``: ``(H00, H10, H01, H11)`` per point."""
    t = np.asarray(tau, float)
    return np.stack(
        [2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t, -2 * t**3 + 3 * t**2, t**3 - t**2], axis=-1
    )


def hct_trace_matrices(geom: TriangleGeometry, k: int, tau) -> tuple[np.ndarray, np.ndarray]:
    """Trace and normal-derivative values on local edge ``k`` at CCW parameters ``tau``.

    Columns follow the 9 canonical dofs ``(v, d_x v, d_y v)`` at local vertices
    0, 1, 2.  Returns ``(values, normal_derivatives)`` each of shape ``(len(tau), 9)``.
    """
    tau = np.atleast_1d(np.asarray(tau, float))
    a_loc, b_loc = (k + 1) % 3, (k + 2) % 3
    L = geom.edge_lengths[k]
    t, n = geom.tangents[k], geom.normals[k]
    H = hermite_basis(tau)
    val = np.zeros((tau.size, 9))
    dn = np.zeros((tau.size, 9))
    val[:, 3 * a_loc] = H[:, 0]
    val[:, 3 * a_loc + 1 : 3 * a_loc + 3] = L * H[:, 1:2] * t
    val[:, 3 * b_loc] = H[:, 2]
    val[:, 3 * b_loc + 1 : 3 * b_loc + 3] = L * H[:, 3:4] * t
    dn[:, 3 * a_loc + 1 : 3 * a_loc + 3] = (1.0 - tau)[:, None] * n
    dn[:, 3 * b_loc + 1 : 3 * b_loc + 3] = tau[:, None] * n
    return val, dn


def hct_trace(values, gradients, geom: TriangleGeometry):
    """Per local edge, the cubic trace and the linear normal derivative.

    ``values`` has shape ``(3,)`` and ``gradients`` ``(3, 2)`` (vertex data).
    Each edge polynomial is in the counter-clockwise parameter ``tau``.
    """
    from numpy.polynomial import Polynomial

    dofs = np.column_stack([values, gradients]).ravel()
    tau = np.linspace(0.0, 1.0, 5)
    out = []
    for k in range(3):
        val, dn = hct_trace_matrices(geom, k, tau)
        out.append(
            (
                Polynomial.fit(tau, val @ dofs, 3, domain=[0, 1], window=[0, 1]),
                Polynomial.fit(tau, dn @ dofs, 1, domain=[0, 1], window=[0, 1]),
            )
        )
    return out


def hermite_basis_derivative(tau) -> np.ndarray:
    t = np.asarray(tau, float)
    return np.stack([6 * t**2 - 6 * t, 3 * t**2 - 4 * t + 1, -6 * t**2 + 6 * t, 3 * t**2 - 2 * t], axis=-1)


def hct_slope_matrix(geom: TriangleGeometry, k: int, tau) -> np.ndarray:
    """Arclength derivative of the edge trace, columns as in :func:`hct_trace_matrices`."""
    tau = np.atleast_1d(np.asarray(tau, float))
    a_loc, b_loc = (k + 1) % 3, (k + 2) % 3
    L = geom.edge_lengths[k]
    t = geom.tangents[k]
    dH = hermite_basis_derivative(tau) / L
    out = np.zeros((tau.size, 9))
    out[:, 3 * a_loc] = dH[:, 0]
    out[:, 3 * a_loc + 1 : 3 * a_loc + 3] = L * dH[:, 1:2] * t
    out[:, 3 * b_loc] = dH[:, 2]
    out[:, 3 * b_loc + 1 : 3 * b_loc + 3] = L * dH[:, 3:4] * t
    return out


def hct_dof_matrix(geom: TriangleGeometry) -> np.ndarray:
    """Canonical dofs read back from the boundary traces of the 9 trace basis functions.

    Vertex values come from the trace endpoints; vertex gradients from the
    tangential derivatives of the two edges meeting there.
    """
    D = np.zeros((9, 9))
    for j in range(3):
        kin, kout = traces.incoming_edge(j), traces.outgoing_edge(j)
        val_out, _ = hct_trace_matrices(geom, kout, [0.0])
        D[3 * j] = val_out[0]
        slopes = np.vstack([hct_slope_matrix(geom, kin, [1.0]), hct_slope_matrix(geom, kout, [0.0])])
        T = np.array([geom.tangents[kin], geom.tangents[kout]])
        D[3 * j + 1 : 3 * j + 3] = np.linalg.solve(T, slopes)
    return D


def hct_alt_dof_matrix(geom: TriangleGeometry) -> np.ndarray:
    """Vertex values plus edge value moments against ``P1(E)`` on the 9 traces."""
    rule = edge_rule(5)
    D = np.zeros((9, 9))
    for j in range(3):
        val, _ = hct_trace_matrices(geom, traces.outgoing_edge(j), [0.0])
        D[j] = val[0]
    r = 3
    for k in range(3):
        val, _ = hct_trace_matrices(geom, k, rule.points)
        for phi in (np.ones_like(rule.points), 2 * rule.points - 1):
            D[r] = (rule.weights * phi) @ val
            r += 1
    return D


# -- nodal-continuous P3 layout ---------------------------------------------

P3_SHARED = (0, 1, 2)
P3_PRIVATE = (3, 4, 5, 6, 7, 8, 9)


def nodal_interior_dofs_p3() -> dict[str, tuple[int, ...]]:
    """Which ``p3_space`` dofs are vertex-shared and which are element-private."""
    return {"shared": P3_SHARED, "private": P3_PRIVATE}


def nodal_p3_dimension(mesh) -> int:
    return mesh.n_interior_vertices + len(P3_PRIVATE) * mesh.n_triangles


# -- cached construction ----------------------------------------------------


def shape_key(geom: TriangleGeometry) -> tuple:
    """Translation-invariant key (rounded vertex offsets and edge signs)."""
    off = np.round(geom.vertices - geom.centroid, 13) + 0.0
    return tuple(off.ravel()) + tuple(int(s) for s in geom.signs)


@lru_cache(maxsize=256)
def _template(kind: str, key: tuple, shear_mode: str) -> LocalSpace:
    off = np.array(key[:6]).reshape(3, 2)
    geom = triangle_geometry(off, key[6:])
    if kind == "p3":
        return p3_space(geom)
    if kind == "x4b":
        return x4b_space(geom)
    if kind == "xddiv15":
        return xddiv_space(geom, "full15", shear_mode)
    if kind == "xddiv12":
        return xddiv_space(geom, "reduced12", shear_mode)
    raise ValueError(f"unknown space {kind!r}")


def local_space(kind: str, geom: TriangleGeometry, shear_mode: str = "analytic") -> LocalSpace:
    """Space ``kind`` on ``geom``, reusing the basis of congruent translated elements."""
    tpl = _template(kind, shape_key(geom), shear_mode if kind.startswith("xddiv") else "analytic")
    return replace(tpl, geom=geom, center=geom.centroid)



__all__ = [
    "LocalSpace",
    "UnisolvenceError",
    "p3_space",
    "x4b_space",
    "xddiv_space",
    "hct_trace",
    "hct_trace_matrices",
    "hct_dof_matrix",
    "hct_alt_dof_matrix",
    "nodal_interior_dofs_p3",
    "local_space",
    "vandermonde",
]
