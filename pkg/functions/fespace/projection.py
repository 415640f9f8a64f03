from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from functions.fespace.basis import edge_basis, reference_edge_points, scalar_basis
from functions.fespace.quadrature import QuadRule, quad_edge, quad_triangle
from model.mesh import Mesh

PointFunction = Callable[[np.ndarray], np.ndarray]

# quadrature headroom above 2m for non-polynomial integrands
SMOOTHNESS_MARGIN = 6


def physical_points(mesh: Mesh, reference_points: np.ndarray) -> np.ndarray:
    """(n_elements, n_points, 2) images of reference points on every element."""
    return np.einsum("tij,qj->tqi", mesh.jacobians, reference_points) + mesh.offsets[:, None, :]


def mass_matrix(degree: int, rule: QuadRule) -> np.ndarray:
    """Reference mass matrix in the (p, q) = 2 int_ref p q inner product; |T| times it is the element mass."""
    phi = scalar_basis(degree).values(rule.points)
    return phi.T @ (2.0 * rule.weights[:, None] * phi)


def l2_project_element(
    f: PointFunction,
    degree: int,
    mesh: Mesh,
    element_id: int,
    rule: Optional[QuadRule] = None,
) -> np.ndarray:
    """Coefficients of P_T^m f in the orthonormal scalar basis of degree m."""
    geometry = mesh.geometry(element_id)
    rule = rule or quad_triangle(2 * degree + SMOOTHNESS_MARGIN)
    phi = scalar_basis(degree).values(rule.points)
    weights = rule.weights * geometry.determinant
    mass = phi.T @ (weights[:, None] * phi)
    load = phi.T @ (weights * f(geometry.to_physical(rule.points)))
    try:
        factor = cho_factor(mass)
    except LinAlgError as e:
        raise LinAlgError(f"Singular mass matrix on element {element_id} for degree {degree}: {e}")
    return cho_solve(factor, load)


def l2_project(f: PointFunction, degree: int, mesh: Mesh, rule: Optional[QuadRule] = None) -> np.ndarray:
    """P_h^m f on every element, (n_elements, dim P_m)."""
    rule = rule or quad_triangle(2 * degree + SMOOTHNESS_MARGIN)
    phi = scalar_basis(degree).values(rule.points)
    values = f(physical_points(mesh, rule.points))
    load = np.einsum("q,qi,tq->ti", 2.0 * rule.weights, phi, values)
    return np.linalg.solve(mass_matrix(degree, rule), load.T).T


def l2_project_vector(f: PointFunction, degree: int, mesh: Mesh, rule: Optional[QuadRule] = None) -> np.ndarray:
    """Component-wise P_h^m of a vector field, (n_elements, 2 * dim P_m) component-major."""
    rule = rule or quad_triangle(2 * degree + SMOOTHNESS_MARGIN)
    x_part = l2_project(lambda p: f(p)[..., 0], degree, mesh, rule)
    y_part = l2_project(lambda p: f(p)[..., 1], degree, mesh, rule)
    return np.hstack([x_part, y_part])


def face_project(v: PointFunction, k: int, mesh: Mesh, face_id: int, rule: Optional[QuadRule] = None) -> np.ndarray:
    """Coefficients of the L2(F) projection onto P_k(F) in the canonical face parameter."""
    rule = rule or quad_edge(2 * k + SMOOTHNESS_MARGIN)
    mu = edge_basis(k).values(rule.points)
    values = v(mesh.face_points(face_id, rule.points))
    return mu.T @ (rule.weights * values)


def project_skeleton(v: PointFunction, k: int, mesh: Mesh, rule: Optional[QuadRule] = None) -> np.ndarray:
    """P_M v face by face, (n_faces, k+1); single valued for a continuous v."""
    return np.array([face_project(v, k, mesh, f, rule) for f in range(mesh.n_faces)])


def trace_project(v: PointFunction, k: int, mesh: Mesh, element_id: int, rule: Optional[QuadRule] = None) -> np.ndarray:
    """
    P_T^boundary v: (3, k+1) coefficients per local edge in canonical face
    parameters. v is evaluated from inside T, so it may be a broken field.
    """
    geometry = mesh.geometry(element_id)
    rule = rule or quad_edge(2 * k + SMOOTHNESS_MARGIN)
    basis = edge_basis(k)
    out = np.empty((3, k + 1))
    for e in range(3):
        sign = mesh.element_face_signs[element_id, e]
        t = rule.points if sign > 0 else 1.0 - rule.points
        points = geometry.to_physical(reference_edge_points(e, rule.points))
        out[e] = basis.values(t).T @ (rule.weights * v(points))
    return out


@dataclass
class PiecewisePolynomial:
    """Broken polynomial field: per-element coefficients in the orthonormal scalar basis."""

    degree: int
    coefficients: np.ndarray

    def values(self, mesh: Mesh, reference_points: np.ndarray) -> np.ndarray:
        """(n_elements, n_points) values at the images of reference points."""
        phi = scalar_basis(self.degree).values(reference_points)
        return self.coefficients @ phi.T

    def gradients(self, mesh: Mesh, reference_points: np.ndarray) -> np.ndarray:
        """(n_elements, n_points, 2) physical gradients."""
        dphi = scalar_basis(self.degree).gradients(reference_points)
        reference = np.einsum("ti,qid->tqd", self.coefficients, dphi)
        inverse = np.linalg.inv(mesh.jacobians)
        return np.einsum("tqd,tde->tqe", reference, inverse)

    def scaled(self, factor: float) -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.degree, factor * self.coefficients)
