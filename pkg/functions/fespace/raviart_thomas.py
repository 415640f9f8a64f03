import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from functions.fespace.basis import edge_basis, reference_edge_points, scalar_basis, scalar_dim
from functions.fespace.quadrature import quad_edge, quad_triangle
from model.mesh import ElementGeometry, Mesh
from model.pydantic_models import MAX_DEGREE

MAX_CONDITION = 1e12

VectorField = Callable[[np.ndarray], np.ndarray]


def _monomial_exponents(degree: int) -> List[Tuple[int, int]]:
    return [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]


def _powers(x: np.ndarray, y: np.ndarray, exponents: List[Tuple[int, int]]) -> np.ndarray:
    return np.stack([x**a * y**b for a, b in exponents], axis=-1)


class RTBasis:
    """
    RT_m(T) = [P_m(T)]^2 + x P_m(T) with m = k + 1 on one physical element.

    The basis is e_c p for monomials p of degree <= m, followed by xhat q for
    the homogeneous monomials q of degree m, all in the scaled coordinate
    xhat = (x - centroid) / h_T. Degrees of freedom are the edge moments
    <tau . n, mu>_F against P_m(F) (canonical face parameter, outward normal
    of T), followed by the interior moments (tau, e_c psi)_T against
    [P_{m-1}(T)]^2, component-major.
    """

    def __init__(self, k: int, geometry: ElementGeometry, signs: Optional[np.ndarray] = None):
        if not 0 <= k <= MAX_DEGREE:
            raise ValueError(f"k={k} is out of the supported range 0..{MAX_DEGREE}")
        self.k = k
        self.degree = m = k + 1
        self.geometry = geometry
        self.signs = np.ones(3, dtype=np.int64) if signs is None else np.asarray(signs, dtype=np.int64)
        self.centre = geometry.to_physical(np.array([1.0 / 3.0, 1.0 / 3.0]))
        self.scale = geometry.diameter

        self.polynomial_exponents = _monomial_exponents(m)
        self.radial_exponents = [(m - b, b) for b in range(m + 1)]
        self.n_polynomial = len(self.polynomial_exponents)
        self.dim = 2 * self.n_polynomial + len(self.radial_exponents)

        self.n_edge_dofs = 3 * (m + 1)
        self.n_interior_scalar = scalar_dim(m - 1)
        self.edge_rule = quad_edge(2 * m)
        self.cell_rule = quad_triangle(2 * m + 2)

        self.dof_matrix = self.moments(self.values)
        condition = np.linalg.cond(self.dof_matrix)
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise LinAlgError(
                f"RT_{m} degrees of freedom are not unisolvent on element {geometry.element_id} "
                f"(condition number {condition:.3e})"
            )
        logging.debug(f"RT_{m} on element {geometry.element_id}: dim={self.dim}, cond(D)={condition:.3e}")
        self._factor = lu_factor(self.dof_matrix)

    def _scaled(self, reference_points: np.ndarray) -> np.ndarray:
        return (self.geometry.to_physical(reference_points) - self.centre) / self.scale

    def values(self, reference_points: np.ndarray) -> np.ndarray:
        """(n_points, dim, 2) basis values at the images of reference points."""
        xh = self._scaled(np.atleast_2d(reference_points))
        x, y = xh[:, 0], xh[:, 1]
        polynomial = _powers(x, y, self.polynomial_exponents)
        radial = _powers(x, y, self.radial_exponents)

        n = self.n_polynomial
        out = np.zeros((len(xh), self.dim, 2))
        out[:, :n, 0] = polynomial
        out[:, n : 2 * n, 1] = polynomial
        out[:, 2 * n :, 0] = x[:, None] * radial
        out[:, 2 * n :, 1] = y[:, None] * radial
        return out

    def divergence(self, reference_points: np.ndarray) -> np.ndarray:
        """(n_points, dim) physical divergence of every basis member."""
        xh = self._scaled(np.atleast_2d(reference_points))
        x, y = xh[:, 0], xh[:, 1]
        d_x = np.stack([a * x ** max(a - 1, 0) * y**b for a, b in self.polynomial_exponents], axis=-1)
        d_y = np.stack([b * x**a * y ** max(b - 1, 0) for a, b in self.polynomial_exponents], axis=-1)
        # div(xhat q) = (2 + m) q for q homogeneous of degree m
        radial = (2.0 + self.degree) * _powers(x, y, self.radial_exponents)
        return np.hstack([d_x, d_y, radial]) / self.scale

    def moments(self, field: VectorField) -> np.ndarray:
        """
        Apply every degree of freedom to a vector field given on reference
        points, returning (n_dofs, ...) for a field of shape (n_points, ..., 2).
        """
        geometry = self.geometry
        s = self.edge_rule.points
        w = self.edge_rule.weights
        mu_basis = edge_basis(self.degree)

        blocks = []
        for e in range(3):
            t = s if self.signs[e] > 0 else 1.0 - s
            mu = mu_basis.values(t)
            normal_values = field(reference_edge_points(e, s)) @ geometry.outward_normals[e]
            blocks.append(geometry.edge_lengths[e] * np.einsum("q,qj,q...->j...", w, mu, normal_values))

        psi = scalar_basis(self.degree - 1).values(self.cell_rule.points)
        weights = geometry.determinant * self.cell_rule.weights
        values = field(self.cell_rule.points)
        for c in range(2):
            blocks.append(np.einsum("q,qj,q...->j...", weights, psi, values[..., c]))
        return np.concatenate(blocks, axis=0)

    def solve(self, dof_values: np.ndarray) -> np.ndarray:
        """Coefficients of the unique member with the given degrees of freedom."""
        return lu_solve(self._factor, dof_values)

    def field_values(self, coefficients: np.ndarray, reference_points: np.ndarray) -> np.ndarray:
        return np.einsum("qid,i->qd", self.values(reference_points), coefficients)

    def divergence_values(self, coefficients: np.ndarray, reference_points: np.ndarray) -> np.ndarray:
        return self.divergence(reference_points) @ coefficients

    def normal_trace(self, coefficients: np.ndarray, local_edge: int, s: np.ndarray) -> np.ndarray:
        """tau . n on a local edge at local parameters s."""
        points = reference_edge_points(local_edge, s)
        return self.field_values(coefficients, points) @ self.geometry.outward_normals[local_edge]


def rt_basis(k: int, geometry: ElementGeometry, signs: Optional[np.ndarray] = None) -> RTBasis:
    return RTBasis(k, geometry, signs)


def element_rt_basis(k: int, mesh: Mesh, element_id: int) -> RTBasis:
    """RT_{k+1} on a mesh element, with edge moments in the canonical face parameters."""
    return RTBasis(k, mesh.geometry(element_id), mesh.element_face_signs[element_id])
