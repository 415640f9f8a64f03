"""
Interpolation operators of the error analysis, built as executable oracles.

pi0 maps skeleton data to a continuous piecewise linear field vanishing on the
boundary, pi1 lifts element and face moments into Gamma(T) plus the cubic
bubble times P_k(T), and pi_h combines the two.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from functions.fespace.basis import barycentric, edge_basis, reference_edge_points, scalar_basis, scalar_dim
from functions.fespace.projection import PiecewisePolynomial, mass_matrix
from functions.fespace.quadrature import quad_edge, quad_triangle
from model.mesh import Mesh

ReferenceFunction = Callable[[np.ndarray], np.ndarray]

MAX_CONDITION = 1e12


def m_T(mu_local: np.ndarray) -> float:
    """Average over the three edges of the edge means; mu_local holds (3, n) trace coefficients."""
    # the constant trace function is 1, so its coefficient is the edge mean
    return float(np.mean(np.asarray(mu_local)[:, 0]))


@dataclass
class ConformingP1Field:
    """Continuous piecewise linear field given by its vertex values, zero on the boundary."""

    values: np.ndarray

    def element_values(self, mesh: Mesh, element_id: int, reference_points: np.ndarray) -> np.ndarray:
        return barycentric(reference_points) @ self.values[mesh.triangles[element_id]]

    def face_coefficients(self, mesh: Mesh, k: int) -> np.ndarray:
        """(n_faces, k+1) trace coefficients, exact for k >= 1."""
        rule = quad_edge(2 * k + 2)
        mu = edge_basis(k).values(rule.points)
        ends = self.values[mesh.faces]
        along = np.outer(ends[:, 0], 1.0 - rule.points) + np.outer(ends[:, 1], rule.points)
        return along @ (rule.weights[:, None] * mu)

    def to_polynomial(self, mesh: Mesh, degree: int = 1) -> PiecewisePolynomial:
        rule = quad_triangle(2 * degree)
        phi = scalar_basis(degree).values(rule.points)
        nodal = self.values[mesh.triangles] @ barycentric(rule.points).T
        load = (nodal * (2.0 * rule.weights)) @ phi
        return PiecewisePolynomial(degree, np.linalg.solve(mass_matrix(degree, rule), load.T).T)


def pi0(mu: np.ndarray, mesh: Mesh) -> ConformingP1Field:
    """
    Interior vertex value: mean of m_T(mu) over the elements around the vertex.
    Boundary vertex value: 0.
    """
    skeleton = np.asarray(mu)
    means = skeleton[mesh.element_faces, 0].mean(axis=1)
    values = np.array([means[patch].mean() for patch in mesh.vertex_patches])
    values[mesh.boundary_vertices] = 0.0
    return ConformingP1Field(values)


class EnrichedSpace:
    """
    Gamma(T) plus the bubble lambda_0 lambda_1 lambda_2 P_k(T) on the reference triangle.

    Gamma(T) is spanned, for every local edge i with end vertices a and b, by
    lambda_a^{p+1} lambda_b^{k-p+1}, p = 0..k; these vanish on the other two
    edges, so the face-moment matrix is block diagonal over the edges.
    """

    def __init__(self, k: int):
        self.k = k
        self.degree = k + 3
        self.n_face = k + 1
        self.n_bubble = scalar_dim(k)
        self.edge_rule = quad_edge(2 * k + 2)
        self.cell_rule = quad_triangle(2 * self.degree)

        s = self.edge_rule.points
        mu = edge_basis(k).values(s)
        along = self._edge_profile(s)
        # M[m, p] = int_0^1 g_p mu_m in the local parameter
        self.face_moments = {1: mu.T @ (self.edge_rule.weights[:, None] * along)}
        mu_reversed = edge_basis(k).values(1.0 - s)
        self.face_moments[-1] = mu_reversed.T @ (self.edge_rule.weights[:, None] * along)

        psi = scalar_basis(k).values(self.cell_rule.points)
        bubble = self._bubble(self.cell_rule.points)
        self.bubble_moments = psi.T @ ((2.0 * self.cell_rule.weights * bubble)[:, None] * psi)

        for name, matrix in [
            ("face", self.face_moments[1]),
            ("face", self.face_moments[-1]),
            ("bubble", self.bubble_moments),
        ]:
            condition = np.linalg.cond(matrix)
            if not np.isfinite(condition) or condition > MAX_CONDITION:
                raise LinAlgError(f"Singular {name}-moment matrix for k={k} (condition {condition:.3e})")
            logging.debug(f"Enriched space k={k}: {name}-moment condition number {condition:.3e}")

    def _edge_profile(self, s: np.ndarray) -> np.ndarray:
        k = self.k
        return np.stack([(1.0 - s) ** (p + 1) * s ** (k - p + 1) for p in range(k + 1)], axis=1)

    @staticmethod
    def _bubble(points: np.ndarray) -> np.ndarray:
        return np.prod(barycentric(points), axis=1)

    def face_values(self, points: np.ndarray) -> np.ndarray:
        """(n_points, 3, k+1) values of the Gamma(T) functions, grouped by edge."""
        lam = barycentric(points)
        k = self.k
        out = np.empty((len(lam), 3, k + 1))
        for i in range(3):
            a, b = lam[:, (i + 1) % 3], lam[:, (i + 2) % 3]
            for p in range(k + 1):
                out[:, i, p] = a ** (p + 1) * b ** (k - p + 1)
        return out

    def bubble_values(self, points: np.ndarray) -> np.ndarray:
        return self._bubble(points)[:, None] * scalar_basis(self.k).values(points)


@lru_cache(maxsize=None)
def enriched_space(k: int) -> EnrichedSpace:
    return EnrichedSpace(k)


@dataclass
class EnrichedLocalField:
    """w_1 + w_2 on one element: Gamma(T) coefficients (3, k+1) and bubble coefficients."""

    k: int
    face_coefficients: np.ndarray
    bubble_coefficients: np.ndarray

    def values(self, reference_points: np.ndarray) -> np.ndarray:
        space = enriched_space(self.k)
        w1 = np.einsum("qip,ip->q", space.face_values(reference_points), self.face_coefficients)
        return w1 + space.bubble_values(reference_points) @ self.bubble_coefficients

    def to_polynomial(self) -> np.ndarray:
        """Coefficients in the orthonormal scalar basis of degree k+3."""
        space = enriched_space(self.k)
        rule = space.cell_rule
        phi = scalar_basis(space.degree).values(rule.points)
        load = phi.T @ (2.0 * rule.weights * self.values(rule.points))
        return np.linalg.solve(mass_matrix(space.degree, rule), load)


def pi1(v: ReferenceFunction, mu_local: np.ndarray, k: int, mesh: Mesh, element_id: int) -> EnrichedLocalField:
    """
    Local lifting: w_1 in Gamma(T) matches the P_k(F) moments of mu on every
    edge, w_2 in the bubble space matches the P_k(T) moments of v - w_1.

    v is evaluated at reference points of the element; mu_local holds (3, k+1)
    trace coefficients in canonical face parameters.
    """
    space = enriched_space(k)
    signs = mesh.element_face_signs[element_id]
    mu_local = np.asarray(mu_local, dtype=float).reshape(3, k + 1)

    face_coefficients = np.empty((3, k + 1))
    for i in range(3):
        face_coefficients[i] = solve(space.face_moments[int(signs[i])], mu_local[i])

    w1 = EnrichedLocalField(k, face_coefficients, np.zeros(space.n_bubble))
    rule = space.cell_rule
    psi = scalar_basis(k).values(rule.points)
    # the factor |T| is common to both sides
    rhs = psi.T @ (2.0 * rule.weights * (v(rule.points) - w1.values(rule.points)))
    bubble_coefficients = solve(space.bubble_moments, rhs)
    return EnrichedLocalField(k, face_coefficients, bubble_coefficients)


def pi_h(v: PiecewisePolynomial, mu: np.ndarray, k: int, mesh: Mesh) -> PiecewisePolynomial:
    """pi0 mu + pi1(v - pi0 mu, mu - pi0 mu) as a broken field of degree k+3."""
    degree = k + 3
    linear = pi0(mu, mesh)
    linear_faces = linear.face_coefficients(mesh, k)
    reduced_mu = np.asarray(mu)[:, : k + 1] - linear_faces

    phi_v = scalar_basis(v.degree)
    coefficients = linear.to_polynomial(mesh, degree).coefficients.copy()
    for t in range(mesh.n_elements):

        def reduced_v(points, t=t):
            return phi_v.values(points) @ v.coefficients[t] - linear.element_values(mesh, t, points)

        lifted = pi1(reduced_v, reduced_mu[mesh.element_faces[t]], k, mesh, t)
        coefficients[t] += lifted.to_polynomial()
    return PiecewisePolynomial(degree, coefficients)


def pi1_stability_ratio(v: ReferenceFunction, mu_local: np.ndarray, k: int, mesh: Mesh, element_id: int) -> float:
    """||pi1(v, mu)||_T / (||v||_T + h_T^{1/2} ||mu||_{boundary T})."""
    geometry = mesh.geometry(element_id)
    lifted = pi1(v, mu_local, k, mesh, element_id).to_polynomial()
    lifted_norm = np.sqrt(geometry.area * np.sum(lifted**2))

    rule = enriched_space(k).cell_rule
    v_norm = np.sqrt(geometry.determinant * np.sum(rule.weights * v(rule.points) ** 2))
    mu_norm = np.sqrt(np.sum(geometry.edge_lengths[:, None] * np.asarray(mu_local).reshape(3, k + 1) ** 2))
    denominator = v_norm + np.sqrt(geometry.h_T) * mu_norm
    return float(lifted_norm / denominator) if denominator > 0.0 else 0.0


def pi_h_moment_residuals(
    result: PiecewisePolynomial, v: PiecewisePolynomial, mu: np.ndarray, k: int, mesh: Mesh
) -> Tuple[float, float]:
    """
    Largest deviations of (result, q)_T from (v, q)_T over q in P_k(T) and of
    the P_k(F) face moments of result from those of mu, each relative to the
    size of the data.
    """
    rule = quad_triangle(result.degree + max(v.degree, k) + 2)
    psi = scalar_basis(k).values(rule.points)
    weights = mesh.determinants[:, None] * rule.weights[None, :]
    gap = result.values(mesh, rule.points) - v.values(mesh, rule.points)
    element_moments = np.einsum("tq,qj->tj", weights * gap, psi)
    element_scale = 1.0 + np.abs(np.einsum("tq,qj->tj", weights * v.values(mesh, rule.points), psi)).max()

    edge = quad_edge(result.degree + k + 2)
    phi = scalar_basis(result.degree)
    mu = np.asarray(mu)
    face_gap = 0.0
    for t in range(mesh.n_elements):
        for e in range(3):
            signs = mesh.element_face_signs[t, e]
            trace = phi.values(reference_edge_points(e, edge.points)) @ result.coefficients[t]
            t_canonical = edge.points if signs > 0 else 1.0 - edge.points
            moments = edge_basis(k).values(t_canonical).T @ (edge.weights * trace)
            face_gap = max(face_gap, np.abs(moments - mu[mesh.element_faces[t, e], : k + 1]).max())
    face_scale = 1.0 + np.abs(mu).max()

    return float(np.abs(element_moments).max() / element_scale), float(face_gap / face_scale)
