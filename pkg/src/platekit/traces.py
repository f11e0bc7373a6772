"""Skeleton traces of tensor and scalar polynomial fields.

Two layers live here.  Row builders turn a trace evaluated at physical points
into a matrix acting on monomial coefficient vectors (scalar layout ``c``,
tensor layout ``[c11, c12, c22]``), which is what element construction and
assembly consume.  The polynomial layer (:func:`shear_trace`,
:func:`nn_trace`, :func:`corner_jump`) works on :class:`Poly2` /
:class:`TensorPoly2` objects for checks and post-processing.

Effective shear is ``n . div M + d_t (t . M n)``; reversing ``t`` leaves it
unchanged, so only the normal fixes its sign.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial

from .polyalg import TensorPoly2, n_monomials, vandermonde

SHEAR_MODES = ("analytic", "central")
CENTRAL_STEP = 1e-3  # fraction of the edge length


def _local(points, center, scale):
    p = np.atleast_2d(np.asarray(points, float))
    return (p[:, 0] - center[0]) / scale, (p[:, 1] - center[1]) / scale


def value_rows(points, center, scale, degree):
    return vandermonde(*_local(points, center, scale), degree)


def gradient_rows(points, center, scale, degree):
    xi, eta = _local(points, center, scale)
    return vandermonde(xi, eta, degree, 1, 0) / scale, vandermonde(xi, eta, degree, 0, 1) / scale


def hessian_rows(points, center, scale, degree):
    """Rows for ``(d_xx, d_xy, d_yy)``."""
    xi, eta = _local(points, center, scale)
    s2 = scale * scale
    return (
        vandermonde(xi, eta, degree, 2, 0) / s2,
        vandermonde(xi, eta, degree, 1, 1) / s2,
        vandermonde(xi, eta, degree, 0, 2) / s2,
    )


def contract_rows(points, a, b, center, scale, degree):
    """Rows of ``a . M b`` for the tensor layout."""
    V = value_rows(points, center, scale, degree)
    return np.hstack([a[0] * b[0] * V, (a[0] * b[1] + a[1] * b[0]) * V, a[1] * b[1] * V])


def nn_rows(points, normal, center, scale, degree):
    return contract_rows(points, normal, normal, center, scale, degree)


def tn_rows(points, tangent, normal, center, scale, degree):
    return contract_rows(points, tangent, normal, center, scale, degree)


def divergence_rows(points, center, scale, degree):
    """Rows of the two components of the row-wise divergence."""
    Vx, Vy = gradient_rows(points, center, scale, degree)
    Z = np.zeros_like(Vx)
    return np.hstack([Vx, Vy, Z]), np.hstack([Z, Vx, Vy])


def divdiv_rows(points, center, scale, degree):
    Hxx, Hxy, Hyy = hessian_rows(points, center, scale, degree)
    return np.hstack([Hxx, 2.0 * Hxy, Hyy])


def shear_rows(points, normal, tangent, center, scale, degree, mode="analytic", step=None):
    """Rows of the effective shear ``n . div M + d_t (t . M n)``.

    ``mode="central"`` replaces both derivatives by central differences with
    the given physical ``step``.
    """
    n = np.asarray(normal, float)
    t = np.asarray(tangent, float)
    pts = np.atleast_2d(np.asarray(points, float))
    if mode == "analytic":
        d1, d2 = divergence_rows(pts, center, scale, degree)
        Vx, Vy = gradient_rows(pts, center, scale, degree)
        Vt = t[0] * Vx + t[1] * Vy
        tn = np.hstack([t[0] * n[0] * Vt, (t[0] * n[1] + t[1] * n[0]) * Vt, t[1] * n[1] * Vt])
        return n[0] * d1 + n[1] * d2 + tn
    if mode == "central":
        if step is None:
            raise ValueError("central differences need a step")

        def diff(direction, rows_fn):
            d = step * np.asarray(direction, float)
            return (rows_fn(pts + d) - rows_fn(pts - d)) / (2.0 * step)

        e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])

        def comp(a, b):
            return lambda p: contract_rows(p, a, b, center, scale, degree)

        # n . div M = sum_ij n_i d_j M_ij
        ndiv = (
            n[0] * diff(e1, comp(e1, e1))
            + n[0] * diff(e2, comp(e1, e2))
            + n[1] * diff(e1, comp(e2, e1))
            + n[1] * diff(e2, comp(e2, e2))
        )
        return ndiv + diff(t, comp(t, n))
    raise ValueError(f"unknown shear mode {mode!r}; expected one of {SHEAR_MODES}")


# -- polynomial layer ------------------------------------------------------


def _tensor_vector(m: TensorPoly2, degree: int = 3) -> tuple[np.ndarray, tuple, float, int]:
    deg = max(degree, m.m11.degree, m.m12.degree, m.m22.degree)
    vec = np.concatenate([m.m11.to_vector(deg), m.m12.to_vector(deg), m.m22.to_vector(deg)])
    return vec, m.m11.center, m.m11.scale, deg


def _edge_poly(values_fn, degree: int) -> Polynomial:
    tau = np.linspace(0.0, 1.0, degree + 2)
    return Polynomial.fit(tau, values_fn(tau), degree, domain=[0, 1], window=[0, 1])


def shear_trace(m: TensorPoly2, geom, k: int, mode: str = "analytic") -> Polynomial:
    """Effective shear on local edge ``k`` (element outward normal).

    The result is a polynomial in the counter-clockwise edge parameter.
    """
    vec, center, scale, deg = _tensor_vector(m)
    a, b = geom.edge_endpoints(k)
    n, t = geom.normals[k], geom.tangents[k]
    step = CENTRAL_STEP * geom.edge_lengths[k]

    def values(tau):
        pts = a[None, :] + np.outer(tau, b - a)
        return shear_rows(pts, n, t, center, scale, deg, mode, step) @ vec

    return _edge_poly(values, deg)


def nn_trace(m: TensorPoly2, geom, k: int) -> Polynomial:
    vec, center, scale, deg = _tensor_vector(m)
    a, b = geom.edge_endpoints(k)
    n = geom.normals[k]

    def values(tau):
        pts = a[None, :] + np.outer(tau, b - a)
        return nn_rows(pts, n, center, scale, deg) @ vec

    return _edge_poly(values, deg)


def tn_trace(m: TensorPoly2, geom, k: int) -> Polynomial:
    vec, center, scale, deg = _tensor_vector(m)
    a, b = geom.edge_endpoints(k)
    n, t = geom.normals[k], geom.tangents[k]

    def values(tau):
        pts = a[None, :] + np.outer(tau, b - a)
        return tn_rows(pts, t, n, center, scale, deg) @ vec

    return _edge_poly(values, deg)


def incoming_edge(j: int) -> int:
    """Local edge that ends at local vertex ``j`` (counter-clockwise)."""
    return (j + 1) % 3


def outgoing_edge(j: int) -> int:
    """Local edge that starts at local vertex ``j`` (counter-clockwise)."""
    return (j + 2) % 3


def corner_jump_rows(geom, j: int, center, scale, degree):
    """Rows of ``[t . M n]`` at local vertex ``j``: incoming minus outgoing edge value."""
    x = geom.vertices[j][None, :]
    kin, kout = incoming_edge(j), outgoing_edge(j)
    return tn_rows(x, geom.tangents[kin], geom.normals[kin], center, scale, degree) - tn_rows(
        x, geom.tangents[kout], geom.normals[kout], center, scale, degree
    )


def corner_jump(m: TensorPoly2, geom, j: int) -> float:
    vec, center, scale, deg = _tensor_vector(m)
    return float((corner_jump_rows(geom, j, center, scale, deg) @ vec)[0])


def tensor_size(degree: int) -> int:
    return 3 * n_monomials(degree)
