"""Triangle and edge quadrature rules.

Weights are normalized to sum to one; multiply by the triangle area or the
edge length.  Triangle points are barycentric triples, edge points are
parameters in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    name: str = ""

    def __len__(self) -> int:
        return len(self.weights)


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a: float, b: float) -> list[tuple[float, float, float]]:
    c = 1.0 - a - b
    return sorted(set(permutations((a, b, c))))


def _symmetric_rule(centroid_w, orbits3, orbits6, degree, name) -> QuadRule:
    pts, wts = [], []
    if centroid_w is not None:
        pts.append((1 / 3, 1 / 3, 1 / 3))
        wts.append(centroid_w)
    for a, w in orbits3:
        for p in _orbit3(a):
            pts.append(p)
            wts.append(w)
    for a, b, w in orbits6:
        for p in _orbit6(a, b):
            pts.append(p)
            wts.append(w)
    return QuadRule(np.array(pts), np.array(wts), degree, name)


@lru_cache(maxsize=None)
def _seven_point() -> QuadRule:
    # Radon's degree-5 rule in closed form.
    s = np.sqrt(15.0)
    return _symmetric_rule(
        9.0 / 40.0,
        [((6.0 - s) / 21.0, (155.0 - s) / 1200.0), ((6.0 + s) / 21.0, (155.0 + s) / 1200.0)],
        [],
        5,
        "seven_point",
    )


@lru_cache(maxsize=None)
def _sixteen_point() -> QuadRule:
    # Dunavant degree-8 rule, constants polished to double precision.
    return _symmetric_rule(
        0.14431560767778716825,
        [
            (0.45929258829272315603, 0.095091634267284624794),
            (0.17056930775176020662, 0.10321737053471825028),
            (0.050547228317030975458, 0.032458497623198080311),
        ],
        [(0.0083947774099576053372, 0.26311282963463811342, 0.027230314174434994265)],
        8,
        "sixteen_point",
    )


@lru_cache(maxsize=None)
def _collapsed_gauss(n: int) -> QuadRule:
    """Duffy-collapsed Gauss-Legendre product rule, exact to degree ``2n - 2``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for xi, wi in zip(x, w):
        for yj, wj in zip(x, w):
            # (u, v) in the unit square -> (u, v (1 - u)) in the triangle
            px = xi
            py = yj * (1.0 - xi)
            pts.append((1.0 - px - py, px, py))
            wts.append(2.0 * wi * wj * (1.0 - xi))
    return QuadRule(np.array(pts), np.array(wts), 2 * n - 2, f"collapsed_gauss_{n}")


TRI_RULES = ("seven_point", "sixteen_point", "high_order")


def tri_rule(kind: str = "seven_point") -> QuadRule:
    """``seven_point`` (degree 5), ``sixteen_point`` (degree 8) or ``high_order`` (degree 14)."""
    if kind == "seven_point":
        return _seven_point()
    if kind == "sixteen_point":
        return _sixteen_point()
    if kind == "high_order":
        return _collapsed_gauss(8)
    raise ValueError(f"unknown triangle rule {kind!r}")


@lru_cache(maxsize=None)
def edge_rule(points: int = 5) -> QuadRule:
    """Gauss-Legendre on ``[0, 1]``, exact to degree ``2 * points - 1``."""
    x, w = np.polynomial.legendre.leggauss(points)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, 2 * points - 1, f"gauss_{points}")


def physical_points(rule: QuadRule, vertices: np.ndarray) -> np.ndarray:
    """Map barycentric rule points onto triangle(s).

    ``vertices`` has shape ``(3, 2)`` or ``(nt, 3, 2)``; the result has shape
    ``(npts, 2)`` or ``(nt, npts, 2)``.
    """
    return np.einsum("qj,...jd->...qd", rule.points, vertices)


def integrate_triangle(fn, vertices: np.ndarray, rule: QuadRule) -> float:
    """Integrate a vectorized ``fn(x, y)`` over one triangle."""
    v = np.asarray(vertices, float)
    e1, e2 = v[1] - v[0], v[2] - v[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    p = physical_points(rule, v)
    return float(area * np.dot(rule.weights, fn(p[:, 0], p[:, 1])))
