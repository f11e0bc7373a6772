"""End-to-end acceptance checks, one reported line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines are printed
even when output capture is on.
"""

import time

import numpy as np
import pytest

from conftest import random_signs, random_triangle
from platekit.assembly import METHODS, MethodSpec, assemble, consistency_residuals
from platekit.elements import hct_dof_matrix, p3_space, x4b_space, xddiv_space
from platekit.mesh import build_uniform_square, triangle_geometry
from platekit.solver import solve_saddle
from platekit.study import (
    REFERENCE_TABLE,
    Solution,
    compute_errors,
    deflection_l2_difference,
    divdiv_projection_gap,
    eoc,
    jump_orthogonality,
    manufactured,
    nn_jump,
    solve,
)

LEVELS = (2, 4, 8, 16, 32, 64)  # N = 8 ... 8192

# published ||u - u_h|| by N, columns primal(nod), primal(cont), mixed(hyb), mixed(nn)
REFERENCE_ERR_U = {
    8: (0.900e-03, 0.871e-03, 0.557e-03, 0.640e-03),
    32: (0.921e-04, 0.426e-04, 0.215e-03, 0.897e-04),
    128: (0.176e-04, 0.130e-04, 0.579e-04, 0.269e-04),
    512: (0.396e-05, 0.326e-05, 0.146e-04, 0.675e-05),
    2048: (0.955e-06, 0.815e-06, 0.361e-05, 0.169e-05),
    8192: (0.236e-06, 0.204e-06, 0.896e-06, 0.424e-06),
}
CHECKED_N = (8, 32, 128, 512, 2048)

# the mixed(nn) column is reproduced by the 15-dof tensor element
TABLE_CONFIGS = {
    0: MethodSpec("primal_nodal"),
    1: MethodSpec("primal_cont"),
    2: MethodSpec("mixed_hybrid"),
    3: MethodSpec("mixed_nn", full_ddiv=True),
}
STUDY_CONFIGS = {
    "primal_hybrid": MethodSpec("primal_hybrid"),
    "primal_nodal": MethodSpec("primal_nodal"),
    "primal_cont": MethodSpec("primal_cont"),
    "mixed_hybrid": MethodSpec("mixed_hybrid"),
    "mixed_nn": MethodSpec("mixed_nn"),
    "mixed_nn_full": MethodSpec("mixed_nn", full_ddiv=True),
}


def report(capsys, ok: bool, title: str, details=()):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  {title}")
        for d in details:
            print(f"      {d}")


class Level:
    """Errors and structural measures of one solve; the system itself is dropped."""

    def __init__(self, spec, n):
        case = manufactured()
        mesh = build_uniform_square(n)
        system = assemble(spec, mesh, case.f)
        rep = solve_saddle(system)
        sol = Solution(system, rep.x, rep)
        self.N, self.h = mesh.n_triangles, mesh.h
        self.residual = rep.residual
        self.errors = compute_errors(sol, case)
        if spec.method.startswith("mixed"):
            self.divdiv_gap = divdiv_projection_gap(sol, case)
            self.nn_jump = nn_jump(sol) if spec.method == "mixed_nn" else None
            self.orthogonality = None
        else:
            self.divdiv_gap = self.nn_jump = None
            self.orthogonality = jump_orthogonality(sol)


@pytest.fixture(scope="module")
def studies():
    t0 = time.perf_counter()
    out = {name: [Level(spec, n) for n in LEVELS] for name, spec in STUDY_CONFIGS.items()}
    out["_seconds"] = time.perf_counter() - t0
    return out


def last_rate(levels, field):
    a, b = levels[-2], levels[-1]
    return eoc(a.errors.get(field), b.errors.get(field), a.h, b.h)


def test_reference_table_literals_agree():
    assert REFERENCE_TABLE == REFERENCE_ERR_U


def test_table_reproduction(studies, capsys):
    names = {0: "primal_nodal", 1: "primal_cont", 2: "mixed_hybrid", 3: "mixed_nn_full"}
    lines, ok = [], True
    for col, name in names.items():
        for lvl in studies[name]:
            ref = REFERENCE_ERR_U[lvl.N][col]
            dev = abs(lvl.errors.err_u - ref) / ref
            checked = lvl.N in CHECKED_N
            ok &= dev <= 0.05 or not checked
            tag = "" if checked else " (not required)"
            lines.append(f"{name:<14} N={lvl.N:<5d} err_u={lvl.errors.err_u:.4e} ref={ref:.3e} dev={100 * dev:5.2f}%{tag}")
    reduced = studies["mixed_nn"]
    lines.append(
        "12-dof mixed_nn for comparison: "
        + " ".join(f"{lvl.errors.err_u:.3e}" for lvl in reduced)
    )
    lines.append(f"all studies took {studies['_seconds']:.1f} s")
    report(capsys, ok, "err_u matches the reference table within 5% for N = 8 ... 2048", lines)
    assert ok


def test_rates_at_finest_pair(studies, capsys):
    checks = []
    for name in ("primal_nodal", "primal_cont", "mixed_hybrid", "mixed_nn"):
        checks.append((name, "err_u", 2.0, 0.15))
    for name in ("primal_nodal", "primal_cont"):
        checks.append((name, "err_hess", 1.0, 0.15))
    for name in ("mixed_hybrid", "mixed_nn"):
        checks.append((name, "err_M", 1.0, 0.15))
    checks.append(("mixed_nn_full", "err_M", 2.0, 0.2))
    lines, ok = [], True
    for name, field, target, tol in checks:
        r = last_rate(studies[name], field)
        good = r is not None and abs(r - target) <= tol
        ok &= good
        lines.append(f"{name:<18} {field:<9} rate {r:.3f}  target {target} +- {tol}  {'ok' if good else 'off'}")
    report(capsys, ok, "convergence rates between N = 2048 and N = 8192", lines)
    assert ok


def test_structural_identities(studies, capsys):
    lines, ok = [], True
    for name in ("mixed_hybrid", "mixed_nn", "mixed_nn_full"):
        worst = max(lvl.divdiv_gap for lvl in studies[name])
        ok &= worst <= 1e-8
        lines.append(f"{name:<18} max ||divdiv M_h - P1 f|| / ||P1 f|| = {worst:.2e}")
    for name in ("mixed_nn", "mixed_nn_full"):
        worst = max(lvl.nn_jump for lvl in studies[name])
        ok &= worst <= 1e-12
        lines.append(f"{name:<18} max nn trace jump = {worst:.2e}")
    for name in ("primal_hybrid", "primal_nodal", "primal_cont"):
        worst = max(lvl.orthogonality for lvl in studies[name])
        ok &= worst <= 1e-9
        lines.append(f"{name:<18} max scaled multiplier pairing = {worst:.2e}")
    report(capsys, ok, "structural identities at every level", lines)
    assert ok


def _dimension_formulas(method, mesh, full=False):
    T, E, Ei, Vi = mesh.n_triangles, mesh.n_edges, mesh.n_interior_edges, mesh.n_interior_vertices
    if method == "primal_hybrid":
        return (10 * T, 2 * E + 3 * T - Vi)
    if method == "primal_nodal":
        return (Vi + 7 * T, 2 * E)
    if method == "primal_cont":
        return (Vi + 2 * Ei + 3 * T, E)
    if method == "mixed_hybrid":
        return ((15 if full else 12) * T, 3 * T, 3 * Vi)
    return ((2 if full else 1) * E + 9 * T, 3 * T, 3 * Vi)


def test_dimension_formulas(capsys):
    f = manufactured().f
    lines, ok = [], True
    for n in (1, 2, 4, 8):
        mesh = build_uniform_square(n)
        for method in METHODS:
            for full in (False, True) if method.startswith("mixed") else (False,):
                want = _dimension_formulas(method, mesh, full)
                got = tuple(assemble(MethodSpec(method, full_ddiv=full), mesh, f).block_sizes)
                ok &= got == want
                name = method + (" (15)" if full else "")
                lines.append(f"n={n} {name:<19} blocks {got} expected {want}")
    report(capsys, ok, "assembled block sizes equal the dimension formulas", lines)
    assert ok


def test_element_unisolvence(capsys):
    rng = np.random.default_rng(20240601)
    spaces = {
        "P3 (10)": (p3_space, 10),
        "X4b (12)": (x4b_space, 12),
        "XdDiv (15)": (lambda g: xddiv_space(g, "full15"), 15),
        "XdDiv nnc (12)": (lambda g: xddiv_space(g, "reduced12"), 12),
    }
    worst = dict.fromkeys([*spaces, "HCT trace (9)"], 0.0)
    for _ in range(100):
        g = triangle_geometry(random_triangle(rng), random_signs(rng))
        for name, (build, dim) in spaces.items():
            D = build(g).dof_matrix()
            assert D.shape == (dim, dim)
            worst[name] = max(worst[name], float(np.abs(D - np.eye(dim)).max()))
        worst["HCT trace (9)"] = max(worst["HCT trace (9)"], float(np.abs(hct_dof_matrix(g) - np.eye(9)).max()))
    ok = max(worst.values()) <= 1e-9
    report(capsys, ok, "dof duality on 100 random triangles", [f"{k:<15} max |D - I| = {v:.2e}" for k, v in worst.items()])
    assert ok


def test_conforming_consistency(capsys):
    case = manufactured()
    specs = [MethodSpec(m) for m in METHODS] + [MethodSpec(m, full_ddiv=True) for m in ("mixed_hybrid", "mixed_nn")]
    lines, ok = [], True
    for n in (1, 2):
        mesh = build_uniform_square(n)
        for spec in specs:
            res = consistency_residuals(spec, mesh, case.u, case.m, case.f)
            worst = max(res.values())
            ok &= worst <= 1e-10
            name = spec.method + (" (15)" if spec.full_ddiv else "")
            lines.append(f"n={n} {name:<19} " + "  ".join(f"{k}={v:.1e}" for k, v in res.items()))
    report(capsys, ok, "exact solution data satisfies every scheme (relative residual <= 1e-10)", lines)
    assert ok


def test_hybridization_equivalence(capsys):
    lines, ok = [], True
    for n in (2, 4):
        mesh = build_uniform_square(n)
        d = deflection_l2_difference(solve(MethodSpec("primal_hybrid"), mesh), solve(MethodSpec("primal_nodal"), mesh))
        ok &= d <= 1e-8
        lines.append(f"n={n} ||u_h(hybrid) - u_h(nodal)|| = {d:.2e}")
    report(capsys, ok, "hybrid and nodal primal deflections agree", lines)
    assert ok


def test_solver_residuals_informational(studies, capsys):
    lines = []
    for name, levels in studies.items():
        if name.startswith("_"):
            continue
        lines.append(f"{name:<18} " + " ".join(f"{lvl.residual:.1e}" for lvl in levels))
    with capsys.disabled():
        print("\nINFO  relative solver residuals ||Kx - b|| / ||b|| by level")
        for d in lines:
            print(f"      {d}")
