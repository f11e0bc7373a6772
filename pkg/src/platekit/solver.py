"""Direct solution of symmetric indefinite saddle-point systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 5000


class SingularSystemError(RuntimeError):
    """The system matrix is exactly singular; this points at an assembly bug."""


@dataclass
class SolveReport:
    x: np.ndarray
    residual: float  # ||K x - b|| / ||b||
    method: str  # "dense-sytrf" or "sparse-lu"
    diagnostics: dict = field(default_factory=dict)


def _context(system) -> str:
    spec = getattr(system, "spec", None)
    mesh = getattr(system, "mesh", None)
    parts = []
    if spec is not None:
        parts.append(f"method {spec.method}")
    if mesh is not None:
        parts.append(f"N={mesh.n_triangles}")
    label = getattr(system, "label", "")
    if label:
        parts.append(label)
    return ", ".join(parts) or "system"


def _dense(K: np.ndarray, b: np.ndarray, where: str):
    # Bunch-Kaufman factorization K = L D L^T with symmetric pivoting
    lu, ipiv, info = la.lapack.dsytrf(K, lower=1)
    if info > 0:
        raise SingularSystemError(f"{where}: matrix is exactly singular (zero pivot {info})")
    x, info = la.lapack.dsytrs(lu, ipiv, b, lower=1)
    if info != 0:
        raise RuntimeError(f"{where}: back substitution failed (info={info})")
    anorm = np.abs(K).sum(axis=0).max()
    rcond, _ = la.lapack.dsycon(lu, ipiv, anorm, lower=1)
    d = _block_pivots(lu, ipiv)
    return x, {
        "rcond": float(rcond),
        "min_pivot": float(np.min(d)),
        "max_pivot": float(np.max(d)),
    }


def _block_pivots(lu: np.ndarray, ipiv: np.ndarray) -> np.ndarray:
    """Magnitudes of the eigenvalues of the 1x1 and 2x2 pivot blocks."""
    n = len(ipiv)
    out = []
    i = 0
    while i < n:
        if ipiv[i] > 0 or i == n - 1:
            out.append(abs(lu[i, i]))
            i += 1
        else:
            blk = np.array([[lu[i, i], lu[i + 1, i]], [lu[i + 1, i], lu[i + 1, i + 1]]])
            out.extend(np.abs(np.linalg.eigvalsh(blk)))
            i += 2
    return np.array(out)


def _sparse(K: sp.spmatrix, b: np.ndarray, where: str):
    try:
        lu = spla.splu(sp.csc_matrix(K), permc_spec="COLAMD")
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise SingularSystemError(f"{where}: matrix is exactly singular") from exc
        raise
    x = lu.solve(b)
    # a few steps of iterative refinement recover accuracy lost to pivot growth
    bn = np.linalg.norm(b) or 1.0
    r = b - K @ x
    for _ in range(3):
        if np.linalg.norm(r) <= 1e-13 * bn:
            break
        x = x + lu.solve(r)
        r = b - K @ x
    d = np.abs(lu.U.diagonal())
    return x, {"min_pivot": float(d.min()), "max_pivot": float(d.max()), "fill": int(lu.nnz)}


def solve_matrix(K, b, where: str = "system") -> SolveReport:
    b = np.asarray(b, float)
    n = K.shape[0]
    if n < DENSE_LIMIT:
        dense = K.toarray() if sp.issparse(K) else np.asarray(K, float)
        x, diag = _dense(dense, b, where)
        kind = "dense-sytrf"
    else:
        x, diag = _sparse(K, b, where)
        kind = "sparse-lu"
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(f"{where}: solution is not finite")
    bn = np.linalg.norm(b)
    r = np.linalg.norm(K @ x - b)
    return SolveReport(x, float(r / bn) if bn > 0 else float(r), kind, diag)


def solve_saddle(system) -> SolveReport:
    """Factorize and solve ``system.matrix x = system.rhs``."""
    return solve_matrix(system.matrix, system.rhs, _context(system))

