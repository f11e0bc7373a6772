import numpy as np
import pytest
import scipy.sparse as sp

from platekit.assembly import METHODS, MethodSpec, assemble
from platekit.mesh import build_uniform_square
from platekit.solver import DENSE_LIMIT, SingularSystemError, _sparse, solve_matrix, solve_saddle
from platekit.study import manufactured

F = manufactured().f


def test_two_by_two():
    r = solve_matrix(np.array([[2.0, 1.0], [1.0, 0.0]]), [3.0, 1.0])
    assert np.allclose(r.x, [1.0, 1.0])
    assert r.method == "dense-sytrf"
    assert r.residual < 1e-15


def test_primal_nodal_n1():
    s = assemble(MethodSpec("primal_nodal"), build_uniform_square(1), F)
    r = solve_saddle(s)
    assert r.residual <= 1e-10
    assert r.diagnostics["min_pivot"] > 0
    assert 0 < r.diagnostics["rcond"] <= 1


def test_singular_dense_names_context():
    s = assemble(MethodSpec("primal_nodal"), build_uniform_square(1), F)
    K = s.matrix.tolil()
    K[0, :] = 0
    K[:, 0] = 0
    with pytest.raises(SingularSystemError, match="primal_nodal.*N=2"):
        solve_matrix(K.tocsr(), s.rhs, "method primal_nodal, N=2")


def test_singular_sparse():
    n = DENSE_LIMIT + 10
    K = sp.diags(np.r_[np.ones(n - 1), 0.0]).tocsr()
    with pytest.raises(SingularSystemError):
        solve_matrix(K, np.ones(n))


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("n", [2, 8])
def test_residual_contract_dense(method, n):
    s = assemble(MethodSpec(method), build_uniform_square(n), F)
    r = solve_saddle(s)
    assert r.method == "dense-sytrf"
    assert r.residual <= 1e-9


@pytest.mark.parametrize("method", ["primal_nodal", "mixed_hybrid", "mixed_nn"])
def test_residual_contract_sparse(method):
    s = assemble(MethodSpec(method), build_uniform_square(16), F)
    assert s.n_unknowns >= DENSE_LIMIT
    r = solve_saddle(s)
    assert r.method == "sparse-lu"
    assert r.residual <= 1e-9


def test_deterministic():
    s = assemble(MethodSpec("mixed_nn"), build_uniform_square(4), F)
    a, b = solve_saddle(s).x, solve_saddle(s).x
    assert np.array_equal(a, b)


def test_dense_and_sparse_agree():
    s = assemble(MethodSpec("primal_cont"), build_uniform_square(4), F)
    dense = solve_saddle(s).x
    x, _ = _sparse(s.matrix, s.rhs, "test")
    assert np.allclose(dense, x, rtol=1e-9, atol=1e-12 * np.abs(dense).max())
