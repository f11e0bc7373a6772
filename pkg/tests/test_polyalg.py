import numpy as np
import pytest
import sympy as sy
from hypothesis import given
from hypothesis import strategies as st

from platekit.polyalg import (
    Poly2,
    TensorPoly2,
    bilaplacian,
    div_div,
    edge_restrict,
    effective_shear,
    hessian,
    normal_normal,
    tangential_normal,
)

X, Y = sy.symbols("x y")
x, y = Poly2.x(), Poly2.y()


def to_sympy(p: Poly2):
    xi = (X - p.center[0]) / p.scale
    eta = (Y - p.center[1]) / p.scale
    return sum(float(v) * xi**i * eta**j for (i, j), v in np.ndenumerate(p.c) if v != 0.0)


def assert_matches(p: Poly2, expr, pts=((0.3, -0.7), (1.1, 0.4), (-0.5, 0.9), (0.0, 0.0))):
    f = sy.lambdify((X, Y), expr, "numpy")
    for a, b in pts:
        assert p(a, b) == pytest.approx(float(f(a, b)), abs=1e-9, rel=1e-9)


def _graded(values, d):
    # keep only the entries c[i, j] with i + j <= d
    c = np.array(values).reshape(d + 1, d + 1)
    i, j = np.indices(c.shape)
    return np.where(i + j <= d, c, 0.0)


coeff_tables = st.integers(0, 6).flatmap(
    lambda d: st.lists(st.floats(-2, 2), min_size=(d + 1) ** 2, max_size=(d + 1) ** 2).map(
        lambda v: _graded(v, d)
    )
)


def test_hessian_examples():
    H = hessian(x * x * y)
    assert H.m11.allclose(2 * y) and H.m12.allclose(2 * x) and H.m22.allclose(Poly2.constant(0.0))
    H4 = hessian(x**4)
    assert H4.m11.allclose(12 * x * x) and H4.m12.allclose(Poly2.constant(0.0))
    lin = hessian(3 * x - 2 * y + 1)
    for comp in (lin.m11, lin.m12, lin.m22):
        assert comp.allclose(Poly2.constant(0.0))


def test_div_div_examples():
    M = TensorPoly2(x * x, x * y, y * y)
    assert div_div(M).allclose(Poly2.constant(6.0))
    assert div_div(TensorPoly2.identity()).allclose(Poly2.constant(0.0))
    assert div_div(hessian(x**4)).allclose(Poly2.constant(24.0))


@given(coeff_tables)
def test_divdiv_hessian_is_bilaplacian(c):
    p = Poly2(c)
    assert div_div(hessian(p)).allclose(bilaplacian(p), atol=1e-9)
    assert_matches(div_div(hessian(p)), sy.diff(to_sympy(p), X, 4) + 2 * sy.diff(to_sympy(p), X, 2, Y, 2) + sy.diff(to_sympy(p), Y, 4))


@given(coeff_tables, st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 3))
def test_derivatives_and_reframe_against_sympy(c, cx, cy, s):
    p = Poly2(c, (cx, cy), s)
    e = to_sympy(p)
    assert_matches(p.dx(), sy.diff(e, X))
    assert_matches(p.dy().dx(), sy.diff(e, X, Y))
    q = p.reframe((cx + 0.3, cy - 0.2), 0.7 * s)
    assert_matches(q, e)


@given(coeff_tables, coeff_tables)
def test_arithmetic_against_sympy(a, b):
    p, q = Poly2(a), Poly2(b)
    if p.degree + q.degree > 8:
        return
    ep, eq = to_sympy(p), to_sympy(q)
    assert_matches(p + q, ep + eq)
    assert_matches(p - q, ep - eq)
    assert_matches(p * q, ep * eq)


def test_degree_cap():
    with pytest.raises(ValueError):
        x**9


def test_vector_roundtrip():
    p = Poly2([[1, 2, 3], [4, 5, 0], [6, 0, 0]])
    assert Poly2.from_vector(p.to_vector(4), 4).allclose(p)


def test_restriction_examples():
    assert np.allclose(edge_restrict(x, (0, 0), (1, 0)).coef, [0, 1])
    ident = TensorPoly2.identity()
    a, b = np.array([0.2, 0.1]), np.array([0.9, 0.6])
    t = (b - a) / np.linalg.norm(b - a)
    n = np.array([t[1], -t[0]])
    assert normal_normal(ident, a, b, n)(0.37) == pytest.approx(1.0)
    assert tangential_normal(ident, a, b, n)(0.37) == pytest.approx(0.0, abs=1e-15)


def test_effective_shear_examples():
    zero = Poly2.constant(0.0)
    M = TensorPoly2(y, zero, zero)
    bottom_n = np.array([0.0, -1.0])
    assert np.allclose(normal_normal(M, (0, 0), (1, 0), bottom_n).coef, 0)
    assert np.allclose(effective_shear(M, (0, 0), (1, 0), bottom_n).coef, 0)
    hyp_n = np.array([1.0, 1.0]) / np.sqrt(2)
    nn = normal_normal(M, (1, 0), (0, 1), hyp_n)
    for t in (0.0, 0.3, 1.0):
        assert nn(t) == pytest.approx(t / 2)
    M2 = TensorPoly2(x * x, x * y, y * y)
    assert np.allclose(effective_shear(M2, (0, 0), (1, 0), bottom_n)(np.linspace(0, 1, 5)), 0)
    assert np.allclose(normal_normal(M2, (0, 0), (1, 0), bottom_n)(np.linspace(0, 1, 5)), 0)


@given(coeff_tables, st.floats(0, 2 * np.pi))
def test_effective_shear_against_sympy(c, angle):
    # Hessian of a polynomial as the tensor; edge through the origin in direction angle
    p = Poly2(c)
    M = hessian(p)
    a = np.array([0.1, -0.2])
    t = np.array([np.cos(angle), np.sin(angle)])
    b = a + 0.8 * t
    n = np.array([t[1], -t[0]])
    e = to_sympy(p)
    m11, m12, m22 = sy.diff(e, X, 2), sy.diff(e, X, Y), sy.diff(e, Y, 2)
    div = (sy.diff(m11, X) + sy.diff(m12, Y), sy.diff(m12, X) + sy.diff(m22, Y))
    tmn = t[0] * (m11 * n[0] + m12 * n[1]) + t[1] * (m12 * n[0] + m22 * n[1])
    dt = t[0] * sy.diff(tmn, X) + t[1] * sy.diff(tmn, Y)
    shear = sy.lambdify((X, Y), n[0] * div[0] + n[1] * div[1] + dt, "numpy")
    got = effective_shear(M, a, b, n)
    for s in (0.0, 0.4, 1.0):
        pt = a + s * (b - a)
        assert got(s) == pytest.approx(float(shear(*pt)), abs=1e-8, rel=1e-8)
