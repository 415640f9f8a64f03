"""
Gauss rules on the reference edge [0, 1] and reference triangle (0,0), (1,0), (0,1).

Triangle rules are collapsed (Duffy) products of a Gauss-Jacobi rule with
weight (1 - x) and a Gauss-Legendre rule, so every weight is positive and any
exactness degree is available.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

MAX_EXACTNESS_DEGREE = 40


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self):
        return len(self.weights)


def _check_degree(exactness_degree: int):
    if exactness_degree < 0 or exactness_degree > MAX_EXACTNESS_DEGREE:
        raise ValueError(
            f"Unsupported quadrature exactness {exactness_degree}, expected 0..{MAX_EXACTNESS_DEGREE}"
        )


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=None)
def quad_edge(exactness_degree: int) -> QuadRule:
    _check_degree(exactness_degree)
    n_points = exactness_degree // 2 + 1
    x, w = leggauss(n_points)
    return QuadRule(_frozen(0.5 * (x + 1.0)), _frozen(0.5 * w), exactness_degree)


@lru_cache(maxsize=None)
def quad_triangle(exactness_degree: int) -> QuadRule:
    _check_degree(exactness_degree)
    n_points = exactness_degree // 2 + 1
    xj, wj = roots_jacobi(n_points, 1.0, 0.0)
    xl, wl = leggauss(n_points)

    u = 0.5 * (1.0 + xj)
    v = 0.5 * (1.0 + xl)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    weights = np.outer(wj, wl).ravel() / 8.0
    return QuadRule(_frozen(points), _frozen(weights), exactness_degree)
