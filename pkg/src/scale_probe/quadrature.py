"""Gauss rules on the reference triangle (0,0), (1,0), (0,1)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray   # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), sums to 1/2
    exactness_degree: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed (conical product) Gauss rule exact for polynomials up to ``degree``.

    Gauss-Jacobi with weight (1-s) in the collapsed direction and Gauss-Legendre
    in the other; m points per direction give exactness 2m-1 with positive weights.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    m = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(m, 1.0, 0.0)
    s = 0.5 * (1.0 + xj)
    ws = wj / 4.0
    xl, wl = np.polynomial.legendre.leggauss(m)
    t = 0.5 * (1.0 + xl)
    wt = 0.5 * wl
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    rule = QuadratureRule(pts, W.ravel(), 2 * m - 1)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)
