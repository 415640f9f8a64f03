import logging
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
from numpy.polynomial.legendre import legvander
from scipy.linalg import solve_triangular

from functions.fespace.quadrature import QuadRule, quad_edge, quad_triangle

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def scalar_dim(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def barycentric(points: np.ndarray) -> np.ndarray:
    """(lambda_0, lambda_1, lambda_2) of reference points."""
    xi, eta = np.atleast_2d(points).T
    return np.column_stack([1.0 - xi - eta, xi, eta])


def reference_edge_points(local_edge: int, s: np.ndarray) -> np.ndarray:
    """Points on local edge i, which runs from reference vertex i+1 to vertex i+2."""
    start = REFERENCE_VERTICES[(local_edge + 1) % 3]
    end = REFERENCE_VERTICES[(local_edge + 2) % 3]
    s = np.asarray(s, dtype=float)
    return start + s[..., None] * (end - start)


def _exponents(degree: int) -> List[Tuple[int, int]]:
    # ordered by total degree so every prefix spans some P_j
    return [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]


class ScalarBasis:
    """
    Hierarchical basis of P_m on the reference triangle.

    Built from monomials in the centred barycentric coordinates
    3*lambda_1 - 1 and 3*lambda_2 - 1, orthonormalised (Householder QR, applied
    twice) in the inner product (p, q) = 2 * int_ref p q. On a physical
    element T the basis is therefore orthogonal with (phi_i, phi_j)_T =
    |T| delta_ij, phi_0 == 1, and its first scalar_dim(j) members span P_j.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError(f"Polynomial degree must be non-negative, got {degree}")
        self.degree = degree
        self.exponents = np.array(_exponents(degree), dtype=np.int64)
        self.dim = len(self.exponents)

        rule = quad_triangle(2 * degree)
        sqrt_w = np.sqrt(2.0 * rule.weights)[:, None]
        coefficients = np.eye(self.dim)
        for _ in range(2):
            values = self._monomials(rule.points) @ coefficients
            r = np.linalg.qr(sqrt_w * values, mode="r")
            r = r * np.sign(np.diag(r))[:, None]
            coefficients = coefficients @ solve_triangular(r, np.eye(self.dim))
        self.coefficients = coefficients

    def _monomials(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        s = 3.0 * points[:, 0] - 1.0
        r = 3.0 * points[:, 1] - 1.0
        return np.stack([s**a * r**b for a, b in self.exponents], axis=1)

    def _monomial_gradients(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        s = 3.0 * points[:, 0] - 1.0
        r = 3.0 * points[:, 1] - 1.0
        d_xi = [3.0 * a * s ** max(a - 1, 0) * r**b for a, b in self.exponents]
        d_eta = [3.0 * b * s**a * r ** max(b - 1, 0) for a, b in self.exponents]
        return np.stack([np.stack(d_xi, axis=1), np.stack(d_eta, axis=1)], axis=-1)

    def values(self, points: np.ndarray) -> np.ndarray:
        """(n_points, dim) basis values at reference points."""
        return self._monomials(points) @ self.coefficients

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """(n_points, dim, 2) reference gradients; multiply by the inverse Jacobian on the right."""
        return np.einsum("pmd,mj->pjd", self._monomial_gradients(points), self.coefficients)


class EdgeBasis:
    """Shifted Legendre polynomials sqrt(2m+1) P_m(2t-1), orthonormal on [0, 1]."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError(f"Polynomial degree must be non-negative, got {degree}")
        self.degree = degree
        self.dim = degree + 1
        self.scale = np.sqrt(2.0 * np.arange(self.dim) + 1.0)

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return legvander(2.0 * t - 1.0, self.degree) * self.scale


@lru_cache(maxsize=None)
def scalar_basis(degree: int) -> ScalarBasis:
    return ScalarBasis(degree)


@lru_cache(maxsize=None)
def edge_basis(degree: int) -> EdgeBasis:
    return EdgeBasis(degree)


class FESpaceTables:
    """
    Reference tables for the HDG spaces of degree k:
    flux [P_k]^2, trace P_k(F), potential P_{k+1}.

    Flux unknowns are ordered component-major: the x-components of the
    n_flux_scalar scalar functions first, then the y-components. Trace
    unknowns of an element are ordered (local edge, mode), each edge
    expressed in the canonical parameter of its face.
    """

    def __init__(self, k: int):
        self.k = k
        self.potential_basis = scalar_basis(k + 1)
        self.trace_basis = edge_basis(k)

        self.n_u = self.potential_basis.dim
        self.n_flux_scalar = scalar_dim(k)
        self.n_sigma = 2 * self.n_flux_scalar
        self.n_trace = k + 1
        self.n_local_trace = 3 * self.n_trace

        # +4 absorbs a degree-4 coefficient such as 1 + x^2 y^2
        self.cell_rule: QuadRule = quad_triangle(2 * (k + 1) + 4)
        self.edge_rule: QuadRule = quad_edge(2 * k + 2)
        self.error_rule: QuadRule = quad_triangle(2 * (k + 2) + 6)

        self.phi = self.potential_basis.values(self.cell_rule.points)
        self.dphi = self.potential_basis.gradients(self.cell_rule.points)

        s = self.edge_rule.points
        self.edge_points = np.stack([reference_edge_points(e, s) for e in range(3)])
        self.edge_phi = np.stack([self.potential_basis.values(p) for p in self.edge_points])
        self.edge_mu: Dict[int, np.ndarray] = {
            1: self.trace_basis.values(s),
            -1: self.trace_basis.values(1.0 - s),
        }
        logging.debug(
            f"FE tables k={k}: n_u={self.n_u}, n_sigma={self.n_sigma}, "
            f"{len(self.cell_rule)} cell / {len(self.edge_rule)} edge quadrature points"
        )

    def potential_trace(self, u_coefficients: np.ndarray, signs: np.ndarray) -> np.ndarray:
        """Coefficients (3, k+1) of P_T^boundary u on each local edge, in canonical face parameters."""
        w = self.edge_rule.weights
        out = np.empty((3, self.n_trace))
        for e in range(3):
            values = self.edge_phi[e] @ u_coefficients
            out[e] = (self.edge_mu[int(signs[e])] * (w * values)[:, None]).sum(axis=0)
        return out

    def flux_values(self, sigma_coefficients: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """(n_points, 2) flux values from scalar basis values of at least n_flux_scalar columns."""
        psi = phi[:, : self.n_flux_scalar]
        coefficients = sigma_coefficients.reshape(2, self.n_flux_scalar)
        return psi @ coefficients.T


@lru_cache(maxsize=None)
def fespace_tables(k: int) -> FESpaceTables:
    return FESpaceTables(k)
