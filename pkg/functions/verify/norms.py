import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from functions.fespace.basis import fespace_tables, scalar_basis
from functions.fespace.projection import (
    PiecewisePolynomial,
    l2_project,
    l2_project_vector,
    physical_points,
    project_skeleton,
)
from functions.fespace.quadrature import QuadRule, quad_triangle
from functions.hdg.solver import HDGSolution
from model.mesh import Mesh
from model.problems import ManufacturedProblem
from model.pydantic_models import HDGConfig


@dataclass
class ErrorTriple:
    """
    e_u = u_h - P_h^{k+1} u per element, e_lam = lambda_h - P_M u per face,
    e_sigma = sigma_h - P_h^k sigma per element (component-major).
    """

    k: int
    e_u: np.ndarray
    e_lam: np.ndarray
    e_sigma: np.ndarray

    def scaled(self, factor: float) -> "ErrorTriple":
        return ErrorTriple(self.k, factor * self.e_u, factor * self.e_lam, factor * self.e_sigma)


def _weights(mesh: Mesh, rule: QuadRule) -> np.ndarray:
    return mesh.determinants[:, None] * rule.weights[None, :]


def flux_values(k: int, sigma: np.ndarray, reference_points: np.ndarray) -> np.ndarray:
    """(n_elements, n_points, 2) values of [P_k]^2 fluxes stored component-major."""
    n_psi = fespace_tables(k).n_flux_scalar
    psi = scalar_basis(k + 1).values(reference_points)[:, :n_psi]
    return np.einsum("qi,tci->tqc", psi, sigma.reshape(len(sigma), 2, n_psi))


def error_triple(mesh: Mesh, problem: ManufacturedProblem, solution: HDGSolution) -> ErrorTriple:
    k = solution.k
    return ErrorTriple(
        k=k,
        e_u=solution.u - l2_project(problem.u, k + 1, mesh),
        e_lam=solution.lam - project_skeleton(problem.u, k, mesh),
        e_sigma=solution.sigma - l2_project_vector(problem.sigma, k, mesh),
    )


def triple_norm(err: ErrorTriple, mesh: Mesh, problem: ManufacturedProblem, k: Optional[int] = None) -> float:
    """(||e_sigma||_c^2 + sum_T alpha_T ||P_T^boundary e_u - e_lam||_{boundary T}^2)^{1/2}."""
    k = err.k if k is None else k
    tables = fespace_tables(k)
    rule = tables.error_rule

    e_sigma = flux_values(k, err.e_sigma, rule.points)
    c_values = problem.c(physical_points(mesh, rule.points))
    flux_part = np.sum(_weights(mesh, rule) * np.einsum("tqa,tqab,tqb->tq", e_sigma, c_values, e_sigma))

    config = HDGConfig(k=k)
    penalty_part = 0.0
    for t in range(mesh.n_elements):
        mismatch = tables.potential_trace(err.e_u[t], mesh.element_face_signs[t]) - err.e_lam[mesh.element_faces[t]]
        penalty_part += config.alpha(mesh.diameters[t]) * np.sum(mesh.edge_lengths[t][:, None] * mismatch**2)

    return float(np.sqrt(flux_part + penalty_part))


def broken_h1_seminorm(field: PiecewisePolynomial, mesh: Mesh) -> float:
    """(sum_T |w|_{1,T}^2)^{1/2}."""
    rule = quad_triangle(2 * max(field.degree, 1))
    gradients = field.gradients(mesh, rule.points)
    return float(np.sqrt(np.sum(_weights(mesh, rule) * np.sum(gradients**2, axis=-1))))


def l2_norm(field: PiecewisePolynomial, mesh: Mesh) -> float:
    # orthonormal basis: (phi_i, phi_j)_T = |T| delta_ij
    return float(np.sqrt(np.sum(mesh.areas[:, None] * field.coefficients**2)))


def potential_h1_error(err: ErrorTriple, mesh: Mesh) -> float:
    """|e_u|_{1,h}."""
    return broken_h1_seminorm(PiecewisePolynomial(err.k + 1, err.e_u), mesh)


def bound_terms(mesh: Mesh, problem: ManufacturedProblem, k: int) -> Dict[str, float]:
    """
    Data terms controlling the flux error: h ||(I - P_h^k) f||, ||(I - P_h^k) sigma||
    and |(I - P_h^{k+1}) u|_{1,h}, with their sum under "total".
    """
    rule = fespace_tables(k).error_rule
    points = physical_points(mesh, rule.points)
    weights = _weights(mesh, rule)

    f_projection = PiecewisePolynomial(k, l2_project(problem.f, k, mesh))
    f_error = np.sqrt(np.sum(weights * (problem.f(points) - f_projection.values(mesh, rule.points)) ** 2))

    sigma_projection = l2_project_vector(problem.sigma, k, mesh)
    sigma_values = flux_values(k, sigma_projection, rule.points)
    sigma_error = np.sqrt(np.sum(weights * np.sum((problem.sigma(points) - sigma_values) ** 2, axis=-1)))

    u_projection = PiecewisePolynomial(k + 1, l2_project(problem.u, k + 1, mesh))
    gradient_gap = problem.grad_u(points) - u_projection.gradients(mesh, rule.points)
    u_error = np.sqrt(np.sum(weights * np.sum(gradient_gap**2, axis=-1)))

    terms = {
        "data": float(mesh.h * f_error),
        "flux": float(sigma_error),
        "potential": float(u_error),
    }
    terms["total"] = sum(terms.values())
    logging.debug(f"Bound terms k={k}, h={mesh.h:.4f}: {terms}")
    return terms
