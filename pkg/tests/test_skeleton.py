import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_signs, random_triangle
from platekit import skeleton
from platekit.assembly import _primal_slots_of
from platekit.elements import local_space, p3_space, x4b_space, xddiv_space
from platekit.mesh import build_uniform_square, triangle_geometry
from platekit.polyalg import Poly2, TensorPoly2, hessian
from platekit.quadrature import physical_points, tri_rule
from platekit.study import manufactured
from platekit.traces import corner_jump, nn_trace, shear_trace, tn_trace

x, y = Poly2.x(), Poly2.y()
ZERO = Poly2.constant(0.0)


def random_cubic_tensor(rng):
    def cubic():
        c = rng.normal(size=(4, 4))
        i, j = np.indices(c.shape)
        return Poly2(np.where(i + j <= 3, c, 0.0))

    return TensorPoly2(cubic(), cubic(), cubic())


def random_geom(seed):
    rng = np.random.default_rng(seed)
    return triangle_geometry(random_triangle(rng), random_signs(rng))


@pytest.mark.parametrize(
    "kind,dim",
    [("P0S_pair", 32), ("HCT_traces", 3), ("HCT_traces_nn", 3), ("P0S_pair_plus_corner", 55), ("P0S", 16)],
)
def test_multiplier_dimensions_n2(kind, dim):
    assert skeleton.build_multiplier(kind, build_uniform_square(2)).dim == dim


@pytest.mark.parametrize("n", [1, 2, 3, 4, 8])
def test_multiplier_dimension_formulas(n):
    m = build_uniform_square(n)
    for kind in skeleton.KINDS:
        assert skeleton.build_multiplier(kind, m).dim == skeleton.expected_dimension(kind, m)


def test_unknown_kind():
    with pytest.raises(ValueError):
        skeleton.build_multiplier("P1S", build_uniform_square(1))


@given(st.integers(1, 6))
def test_corner_basis_sums_to_zero_at_interior_vertices(n):
    m = build_uniform_square(n)
    B = skeleton.constrained_corner_basis(m).toarray()
    assert B.shape[1] == 3 * m.n_triangles - m.n_interior_vertices
    assert np.linalg.matrix_rank(B) == B.shape[1]
    for v, slots in enumerate(m.vertex_triangles()):
        if m.boundary_vertex[v]:
            continue
        ids = [3 * t + j for t, j in slots]
        assert np.all(B[ids].sum(axis=0) == 0.0)


def test_primal_pairing_with_constant(reference_geom):
    s = p3_space(reference_geom)
    P = skeleton.pair_primal("P0S_pair", s)
    one = P @ s.interpolate(Poly2.constant(1.0))
    L = reference_geom.edge_lengths
    assert np.allclose(one[list(skeleton.SLOT_NN)], 0.0, atol=1e-13)
    assert np.allclose(np.abs(one[list(skeleton.SLOT_SHEAR)]), L)
    assert np.allclose(one[list(skeleton.SLOT_CORNER)], -1.0)


def test_primal_pairing_kind_checks(reference_geom):
    with pytest.raises(skeleton.PairingError):
        skeleton.pair_primal("P0S", p3_space(reference_geom))
    with pytest.raises(skeleton.PairingError):
        skeleton.pair_primal("P0S_pair", x4b_space(reference_geom))
    with pytest.raises(skeleton.PairingError):
        skeleton.pair_primal("HCT_traces", p3_space(reference_geom))
    with pytest.raises(skeleton.PairingError):
        skeleton.pair_mixed("HCT_traces", p3_space(reference_geom))
    with pytest.raises(skeleton.PairingError):
        skeleton.pair_mixed("P0S", xddiv_space(reference_geom))


@given(st.integers(0, 10**6))
def test_primal_pairing_matches_exact_traces(seed):
    g = random_geom(seed)
    s = p3_space(g)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=10)
    v = s.combine(c)
    slots = skeleton.pair_primal("P0S_pair_plus_corner", s) @ c
    assert np.allclose(slots, _primal_slots_of(v, g), atol=1e-10 * max(1, np.abs(slots).max()))


@pytest.mark.parametrize("diag", ["alternating", "rising"])
def test_clamped_smooth_field_pairs_to_zero(diag):
    m = build_uniform_square(3, diag)
    u = manufactured().u
    for kind in ("P0S_pair_plus_corner", "P0S_pair", "P0S"):
        mult = skeleton.build_multiplier(kind, m)
        slots = np.concatenate([_primal_slots_of(u, m.geometry(t)) for t in range(m.n_triangles)])
        if kind == "P0S":
            slots = slots.reshape(-1, 9)
            slots[:, :3] = 0.0
            slots[:, 6:] = 0.0
            slots = slots.ravel()
        assert np.abs(mult.Q.T @ slots).max() <= 1e-12 * np.abs(slots).max()
    # an unclamped smooth field does not
    mult = skeleton.build_multiplier("P0S_pair", m)
    slots = np.concatenate([_primal_slots_of(x * y + 1.0, m.geometry(t)) for t in range(m.n_triangles)])
    assert np.abs(mult.Q.T @ slots).max() > 1e-3


def test_traces_of_identity(reference_geom):
    I = TensorPoly2.identity()
    tau = np.linspace(0, 1, 4)
    for k in range(3):
        assert np.allclose(shear_trace(I, reference_geom, k)(tau), 0.0, atol=1e-13)
        assert np.allclose(nn_trace(I, reference_geom, k)(tau), 1.0)
        assert np.allclose(tn_trace(I, reference_geom, k)(tau), 0.0, atol=1e-13)
    for j in range(3):
        assert corner_jump(I, reference_geom, j) == pytest.approx(0.0, abs=1e-13)


def test_traces_example_on_bottom_edge(reference_geom):
    M = TensorPoly2(x * x, x * y, y * y)
    tau = np.linspace(0, 1, 5)
    # local edge 2 of the reference triangle is the bottom edge
    assert np.allclose(reference_geom.normals[2], [0, -1])
    assert np.allclose(shear_trace(M, reference_geom, 2)(tau), 0.0, atol=1e-13)
    assert np.allclose(nn_trace(M, reference_geom, 2)(tau), 0.0, atol=1e-13)


@given(st.integers(0, 10**6))
def test_central_differences_close_to_analytic(seed):
    rng = np.random.default_rng(seed)
    v = random_triangle(rng)
    # unit diameter: the difference step is a fixed fraction of the edge length
    v = (v - v.mean(axis=0)) / max(np.linalg.norm(v[i] - v[j]) for i, j in ((0, 1), (1, 2), (2, 0)))
    g = triangle_geometry(v)
    M = random_cubic_tensor(rng)
    tau = np.linspace(0, 1, 6)
    for k in range(3):
        a = shear_trace(M, g, k)(tau)
        c = shear_trace(M, g, k, "central")(tau)
        size = sum(np.abs(p.c).sum() for p in (M.m11, M.m12, M.m22))
        assert np.abs(a - c).max() <= 1e-6 * size


@given(st.integers(0, 10**6))
def test_interior_edge_consistency(seed):
    rng = np.random.default_rng(seed)
    M = random_cubic_tensor(rng)
    g1 = triangle_geometry([[0, 0], [1, 0], [1, 1]])
    g2 = triangle_geometry([[0, 0], [1, 1], [0, 1]])
    tau = np.linspace(0, 1, 5)
    # the diagonal is edge 1 of g1 and edge 2 of g2, traversed in opposite directions
    assert np.allclose(nn_trace(M, g1, 1)(tau), nn_trace(M, g2, 2)(tau[::-1]))
    assert np.allclose(shear_trace(M, g1, 1)(tau), -shear_trace(M, g2, 2)(tau[::-1]))


@given(st.integers(0, 10**6))
def test_corner_jumps_sum_to_zero_around_interior_vertex(seed):
    rng = np.random.default_rng(seed)
    M = random_cubic_tensor(rng)
    m = build_uniform_square(2)
    centre = int(np.flatnonzero(~m.boundary_vertex)[0])
    total = sum(corner_jump(M, m.geometry(t), j) for t, j in m.vertex_triangles()[centre])
    assert total == pytest.approx(0.0, abs=1e-11)


@given(st.integers(0, 10**6))
def test_local_integration_by_parts(seed):
    # int M : D2 v - int divdiv M v equals the element skeleton pairing used by the schemes
    g = random_geom(seed)
    c = g.centroid
    v = ((x - c[0]) ** 2 * (y - c[1]) + 0.3 * (x - c[0]) ** 3 - (y - c[1]) ** 2 + x) * 0.5
    rule = tri_rule("high_order")
    pts = physical_points(rule, g.vertices)
    H = hessian(v)
    for variant in ("full15", "reduced12"):
        s = xddiv_space(g, variant)
        vals = s.values(pts)  # (q, dim, 3)
        dd = s.divdiv(pts)
        hv = np.stack([h(pts[:, 0], pts[:, 1]) for h in (H.m11, H.m12, H.m22)], axis=-1)
        lhs = g.area * rule.weights @ (
            vals[..., 0] * hv[:, None, 0] + 2 * vals[..., 1] * hv[:, None, 1] + vals[..., 2] * hv[:, None, 2]
            - dd * v(pts[:, 0], pts[:, 1])[:, None]
        )
        rhs = skeleton.pair_mixed_exact(v, s, "HCT_traces")
        assert np.allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(lhs).max()))


def test_mixed_pairing_zero_trace(reference_geom):
    s = xddiv_space(reference_geom, "reduced12")
    P = skeleton.pair_mixed("HCT_traces", s)
    assert np.allclose(np.zeros(9) @ P, 0.0)


def test_mixed_pairing_unit_shear_dof(reference_geom):
    s = xddiv_space(reference_geom, "reduced12")
    psi = np.tile([1.0, 0.0, 0.0], 3)  # trace of the constant 1
    for kind in skeleton.MIXED_KINDS:
        P = skeleton.pair_mixed(kind, s)
        # shear dof 0 on local edge 2 (the unit-length bottom edge)
        j = s.dof_labels.index("shear0@e2")
        assert psi @ P[:, j] == pytest.approx(-reference_geom.edge_lengths[2])
        assert reference_geom.edge_lengths[2] == pytest.approx(1.0)


@pytest.mark.parametrize("kind,variant", [("HCT_traces", "reduced12"), ("HCT_traces_nn", "reduced12"), ("HCT_traces", "full15")])
def test_identity_against_conforming_trace_vanishes(kind, variant):
    m = build_uniform_square(3)
    mult = skeleton.build_multiplier(kind, m)
    rng = np.random.default_rng(1)
    slots = mult.slot_values(rng.normal(size=mult.dim))
    total = 0.0
    scale = 0.0
    for t in range(m.n_triangles):
        s = local_space("xddiv15" if variant == "full15" else "xddiv12", m.geometry(t))
        P = skeleton.pair_mixed(kind, s)
        c = s.dofs_of(TensorPoly2.identity())
        total += slots[t] @ P @ c
        scale += np.abs(slots[t]) @ np.abs(P) @ np.abs(c)
    assert abs(total) <= 1e-12 * max(scale, 1.0)


@given(st.integers(0, 10**6))
def test_mixed_pairing_matches_exact_for_hct_traces(seed):
    # HCT traces reproduce linears exactly, so the discrete and exact pairings agree there
    g = random_geom(seed)
    rng = np.random.default_rng(seed)
    a, b, c0 = rng.normal(size=3)
    v = x * a + y * b + c0
    dofs = np.column_stack([v(g.vertices[:, 0], g.vertices[:, 1]), np.tile([a, b], (3, 1))]).ravel()
    s = xddiv_space(g, "full15")
    for kind in skeleton.MIXED_KINDS:
        assert np.allclose(dofs @ skeleton.pair_mixed(kind, s), skeleton.pair_mixed_exact(v, s, kind), atol=1e-9)
