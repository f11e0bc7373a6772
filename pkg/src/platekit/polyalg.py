"""Exact bivariate polynomial algebra on triangles and univariate algebra on edges.

Polynomials are stored as dense monomial coefficient tables in a local frame:
``p(x, y) = sum c[i, j] * xi**i * eta**j`` with ``xi = (x - cx) / s`` and
``eta = (y - cy) / s``.  Global polynomials (e.g. the manufactured deflection)
use the trivial frame ``center=(0, 0)``, ``scale=1``.  Element bases use the
element centroid and size so that small elements stay well conditioned.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

MAX_DEGREE = 8


@lru_cache(maxsize=None)
def monomial_exponents(degree: int) -> tuple[tuple[int, int], ...]:
    """Exponent pairs ``(i, j)`` with ``i + j <= degree``, graded order."""
    return tuple((d - j, j) for d in range(degree + 1) for j in range(d + 1))


def n_monomials(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def vandermonde(xi, eta, degree: int, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Matrix of ``d^dx/dxi^dx d^dy/deta^dy`` of all monomials at local points.

    Returns an array of shape ``(npts, n_monomials(degree))``.  Derivatives are
    taken with respect to the local coordinates; divide by ``scale**(dx+dy)``
    for physical derivatives.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    exps = monomial_exponents(degree)
    out = np.zeros((xi.size, len(exps)))
    for col, (i, j) in enumerate(exps):
        if i < dx or j < dy:
            continue
        fx = _falling(i, dx)
        fy = _falling(j, dy)
        out[:, col] = fx * fy * xi ** (i - dx) * eta ** (j - dy)
    return out


def _falling(n: int, k: int) -> int:
    r = 1
    for m in range(k):
        r *= n - m
    return r


class Poly2:
    """Bivariate polynomial of bounded degree in a fixed affine frame."""

    __slots__ = ("c", "center", "scale")

    def __init__(self, coeffs, center=(0.0, 0.0), scale: float = 1.0):
        c = np.array(coeffs, dtype=float, ndmin=2)
        if c.shape[0] != c.shape[1]:
            size = max(c.shape)
            padded = np.zeros((size, size))
            padded[: c.shape[0], : c.shape[1]] = c
            c = padded
        self.c = _trim(c)
        if self.degree > MAX_DEGREE:
            raise ValueError(f"degree {self.degree} exceeds cap {MAX_DEGREE}")
        self.center = (float(center[0]), float(center[1]))
        self.scale = float(scale)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, center=(0.0, 0.0), scale: float = 1.0) -> Poly2:
        return cls([[value]], center, scale)

    @classmethod
    def x(cls) -> Poly2:
        return cls([[0.0, 0.0], [1.0, 0.0]])

    @classmethod
    def y(cls) -> Poly2:
        return cls([[0.0, 1.0], [0.0, 0.0]])

    @classmethod
    def from_vector(cls, vec, degree: int, center=(0.0, 0.0), scale: float = 1.0) -> Poly2:
        """Inverse of :meth:`to_vector` (graded monomial order)."""
        c = np.zeros((degree + 1, degree + 1))
        for v, (i, j) in zip(vec, monomial_exponents(degree)):
            c[i, j] = v
        return cls(c, center, scale)

    @classmethod
    def from_univariate(cls, coeffs_x=(1.0,), coeffs_y=(1.0,)) -> Poly2:
        """Tensor product ``gx(x) * gy(y)`` in the global frame."""
        return cls(np.outer(coeffs_x, coeffs_y))

    # -- basic properties -------------------------------------------------
    @property
    def degree(self) -> int:
        nz = np.argwhere(self.c != 0.0)
        if nz.size == 0:
            return 0
        return int(nz.sum(axis=1).max())

    def to_vector(self, degree: int | None = None) -> np.ndarray:
        degree = self.degree if degree is None else degree
        if self.degree > degree:
            raise ValueError("polynomial degree exceeds requested vector degree")
        c = self._padded(degree + 1)
        return np.array([c[i, j] for i, j in monomial_exponents(degree)])

    def _padded(self, size: int) -> np.ndarray:
        out = np.zeros((size, size))
        k = min(size, self.c.shape[0])
        out[:k, :k] = self.c[:k, :k]
        return out

    def _same_frame(self, other: Poly2) -> None:
        if self.center != other.center or self.scale != other.scale:
            raise ValueError("polynomials live in different frames; reframe first")

    def local(self, x, y):
        return (np.asarray(x, float) - self.center[0]) / self.scale, (
            np.asarray(y, float) - self.center[1]
        ) / self.scale

    def __call__(self, x, y):
        xi, eta = self.local(x, y)
        return np.polynomial.polynomial.polyval2d(xi, eta, self.c)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if np.isscalar(other):
            c = self.c.copy()
            c[0, 0] += other
            return Poly2(c, self.center, self.scale)
        self._same_frame(other)
        size = max(self.c.shape[0], other.c.shape[0])
        return Poly2(self._padded(size) + other._padded(size), self.center, self.scale)

    __radd__ = __add__

    def __neg__(self):
        return Poly2(-self.c, self.center, self.scale)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly2(self.c * other, self.center, self.scale)
        self._same_frame(other)
        a, b = self.c, other.c
        out = np.zeros((a.shape[0] + b.shape[0] - 1,) * 2)
        for (i, j), v in np.ndenumerate(a):
            if v != 0.0:
                out[i : i + b.shape[0], j : j + b.shape[1]] += v * b
        return Poly2(out, self.center, self.scale)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly2.constant(1.0, self.center, self.scale)
        for _ in range(k):
            out = out * self
        return out

    def allclose(self, other: Poly2, atol: float = 1e-12) -> bool:
        self._same_frame(other)
        size = max(self.c.shape[0], other.c.shape[0])
        return bool(np.allclose(self._padded(size), other._padded(size), rtol=0, atol=atol))

    def __repr__(self):
        terms = [f"{v:+.6g}*x^{i}y^{j}" for (i, j), v in np.ndenumerate(self.c) if v != 0.0]
        return f"Poly2({' '.join(terms) or '0'})"

    # -- calculus ---------------------------------------------------------
    def dx(self) -> Poly2:
        """Physical partial derivative with respect to x."""
        n = self.c.shape[0]
        if n == 1:
            return Poly2.constant(0.0, self.center, self.scale)
        out = np.zeros((n - 1, n))
        for i in range(1, n):
            out[i - 1, :] = i * self.c[i, :]
        return Poly2(out / self.scale, self.center, self.scale)

    def dy(self) -> Poly2:
        n = self.c.shape[0]
        if n == 1:
            return Poly2.constant(0.0, self.center, self.scale)
        out = np.zeros((n, n - 1))
        for j in range(1, n):
            out[:, j - 1] = j * self.c[:, j]
        return Poly2(out / self.scale, self.center, self.scale)

    def reframe(self, center, scale: float) -> Poly2:
        """Exact change of frame by binomial expansion."""
        # x = cx_old + s_old*xi_old = cx_new + s_new*xi_new
        a = (center[0] - self.center[0]) / self.scale
        b = (center[1] - self.center[1]) / self.scale
        r = scale / self.scale
        n = self.c.shape[0]
        out = np.zeros((n, n))
        for (i, j), v in np.ndenumerate(self.c):
            if v == 0.0:
                continue
            for p in range(i + 1):
                cx = comb(i, p) * a ** (i - p) * r**p
                for q in range(j + 1):
                    out[p, q] += v * cx * comb(j, q) * b ** (j - q) * r**q
        return Poly2(out, center, scale)

    def restrict(self, a, b) -> Polynomial:
        """Restriction to the segment ``a + t (b - a)``, ``t`` in ``[0, 1]``."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        xa, ya = self.local(*a)
        dxi, deta = (b - a) / self.scale
        lx = Polynomial([xa, dxi])
        ly = Polynomial([ya, deta])
        out = Polynomial([0.0])
        n = self.c.shape[0]
        for i in range(n):
            for j in range(n - i):
                v = self.c[i, j]
                if v != 0.0:
                    out = out + v * lx**i * ly**j
        return out


def _trim(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    while n > 1 and not np.any(c[n - 1, :]) and not np.any(c[:, n - 1]):
        n -= 1
    return c[:n, :n].copy()


class TensorPoly2:
    """Symmetric 2x2 tensor field with polynomial entries (shared off-diagonal)."""

    __slots__ = ("m11", "m12", "m22")

    def __init__(self, m11: Poly2, m12: Poly2, m22: Poly2):
        m11._same_frame(m12)
        m11._same_frame(m22)
        self.m11, self.m12, self.m22 = m11, m12, m22

    @classmethod
    def identity(cls) -> TensorPoly2:
        one, zero = Poly2.constant(1.0), Poly2.constant(0.0)
        return cls(one, zero, one)

    @property
    def m21(self) -> Poly2:
        return self.m12

    def __call__(self, x, y) -> np.ndarray:
        """Entries ``(m11, m12, m22)`` stacked on the last axis."""
        return np.stack([self.m11(x, y), self.m12(x, y), self.m22(x, y)], axis=-1)

    def __add__(self, other):
        return TensorPoly2(self.m11 + other.m11, self.m12 + other.m12, self.m22 + other.m22)

    def __sub__(self, other):
        return TensorPoly2(self.m11 - other.m11, self.m12 - other.m12, self.m22 - other.m22)

    def __mul__(self, k: float):
        return TensorPoly2(self.m11 * k, self.m12 * k, self.m22 * k)

    __rmul__ = __mul__

    def div(self) -> tuple[Poly2, Poly2]:
        """Row-wise divergence."""
        return (self.m11.dx() + self.m12.dy(), self.m12.dx() + self.m22.dy())

    def contract(self, a, b) -> Poly2:
        """``a . M b`` for constant vectors ``a``, ``b``."""
        a1, a2 = a
        b1, b2 = b
        return self.m11 * (a1 * b1) + self.m12 * (a1 * b2 + a2 * b1) + self.m22 * (a2 * b2)

    def allclose(self, other: TensorPoly2, atol: float = 1e-12) -> bool:
        return (
            self.m11.allclose(other.m11, atol)
            and self.m12.allclose(other.m12, atol)
            and self.m22.allclose(other.m22, atol)
        )


def hessian(p: Poly2) -> TensorPoly2:
    px = p.dx()
    return TensorPoly2(px.dx(), px.dy(), p.dy().dy())


def div_div(m: TensorPoly2) -> Poly2:
    """``d_xx M11 + 2 d_xy M12 + d_yy M22``."""
    return m.m11.dx().dx() + m.m12.dx().dy() * 2.0 + m.m22.dy().dy()


def bilaplacian(p: Poly2) -> Poly2:
    lap = p.dx().dx() + p.dy().dy()
    return lap.dx().dx() + lap.dy().dy()


def edge_restrict(p: Poly2, a, b) -> Polynomial:
    """Restriction of ``p`` to the edge ``a -> b`` in the normalized parameter."""
    return p.restrict(a, b)


def edge_frame(a, b):
    """Length, unit tangent ``a -> b`` and its clockwise normal."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = b - a
    length = float(np.hypot(*d))
    t = d / length
    return length, t, np.array([t[1], -t[0]])


def tangential_derivative(p: Poly2, a, b) -> Polynomial:
    """Arclength derivative of ``p`` along ``a -> b``, restricted to the edge."""
    length, t, _ = edge_frame(a, b)
    return (p.dx() * t[0] + p.dy() * t[1]).restrict(a, b)


def normal_normal(m: TensorPoly2, a, b, normal) -> Polynomial:
    return m.contract(normal, normal).restrict(a, b)


def tangential_normal(m: TensorPoly2, a, b, normal) -> Polynomial:
    _, t, _ = edge_frame(a, b)
    return m.contract(t, normal).restrict(a, b)


def effective_shear(m: TensorPoly2, a, b, normal) -> Polynomial:
    """``n . div M + d_t (t . M n)`` on the edge ``a -> b``.

    ``t`` is the unit tangent pointing from ``a`` to ``b``; ``normal`` must be a
    unit vector orthogonal to it.
    """
    length, t, _ = edge_frame(a, b)
    d1, d2 = m.div()
    ndiv = (d1 * normal[0] + d2 * normal[1]).restrict(a, b)
    tmn = m.contract(t, normal).restrict(a, b)
    return ndiv + tmn.deriv() / length
