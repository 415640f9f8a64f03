"""
Local H(div) postprocessing of the HDG flux.

On every element the correction in RT_{k+1}(T) is orthogonal to [P_k(T)]^2 and
has normal moments equal to those of the penalty term
alpha_T (P_T^boundary u_h - lambda_h); sigma_h* = sigma_h - correction.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from functions.fespace.basis import fespace_tables, scalar_basis
from functions.fespace.quadrature import quad_edge
from functions.fespace.raviart_thomas import RTBasis, element_rt_basis
from functions.hdg.solver import HDGSolution
from model.mesh import Mesh
from model.problems import ManufacturedProblem
from model.pydantic_models import HDGConfig


@dataclass
class PostprocessedFlux:
    """sigma_h* as RT_{k+1} coefficients per element, together with the element bases."""

    k: int
    coefficients: np.ndarray
    bases: List[RTBasis]

    def values(self, element_id: int, reference_points: np.ndarray) -> np.ndarray:
        return self.bases[element_id].field_values(self.coefficients[element_id], reference_points)

    def divergence(self, element_id: int, reference_points: np.ndarray) -> np.ndarray:
        return self.bases[element_id].divergence_values(self.coefficients[element_id], reference_points)

    def normal_trace(self, element_id: int, local_edge: int, s: np.ndarray) -> np.ndarray:
        return self.bases[element_id].normal_trace(self.coefficients[element_id], local_edge, s)


def penalty_jump(mesh: Mesh, element_id: int, solution: HDGSolution) -> np.ndarray:
    """(3, k+1) coefficients of alpha_T (P_T^boundary u_h - lambda_h) per local edge."""
    tables = fespace_tables(solution.k)
    alpha = HDGConfig(k=solution.k).alpha(mesh.diameters[element_id])
    signs = mesh.element_face_signs[element_id]
    trace = tables.potential_trace(solution.u[element_id], signs)
    return alpha * (trace - solution.lam[mesh.element_faces[element_id]])


def embed_flux(basis: RTBasis, sigma_coefficients: np.ndarray) -> np.ndarray:
    """RT_{k+1} coefficients of a [P_k]^2 flux given in the orthonormal scalar basis."""
    return basis.solve(basis.moments(_flux_field(basis, sigma_coefficients)))


def correction_dofs(basis: RTBasis, mesh: Mesh, element_id: int, solution: HDGSolution) -> np.ndarray:
    jump = penalty_jump(mesh, element_id, solution)
    edge_moments = np.zeros((3, basis.degree + 1))
    # the trace basis of degree k is the leading part of the one of degree k+1
    edge_moments[:, : solution.k + 1] = mesh.edge_lengths[element_id][:, None] * jump
    return np.concatenate([edge_moments.ravel(), np.zeros(2 * basis.n_interior_scalar)])


def local_correction(mesh: Mesh, element_id: int, solution: HDGSolution) -> np.ndarray:
    """RT_{k+1} coefficients of the correction on one element."""
    basis = element_rt_basis(solution.k, mesh, element_id)
    return basis.solve(correction_dofs(basis, mesh, element_id, solution))


def postprocess_flux(mesh: Mesh, solution: HDGSolution) -> PostprocessedFlux:
    bases = []
    coefficients = []
    for t in range(mesh.n_elements):
        basis = element_rt_basis(solution.k, mesh, t)
        dofs = basis.moments(_flux_field(basis, solution.sigma[t])) - correction_dofs(basis, mesh, t, solution)
        coefficients.append(basis.solve(dofs))
        bases.append(basis)
    logging.debug(f"Postprocessed flux k={solution.k} on {mesh.n_elements} elements")
    return PostprocessedFlux(k=solution.k, coefficients=np.array(coefficients), bases=bases)


def _flux_field(basis: RTBasis, sigma_coefficients: np.ndarray):
    n_psi = fespace_tables(basis.k).n_flux_scalar
    coefficients = sigma_coefficients.reshape(2, n_psi)
    return lambda points: scalar_basis(basis.k + 1).values(points)[:, :n_psi] @ coefficients.T


def normal_jumps(mesh: Mesh, flux: PostprocessedFlux) -> np.ndarray:
    """Largest |sigma* . n_L + sigma* . n_R| at edge quadrature points, per interior face."""
    s = quad_edge(2 * flux.k + 4).points
    faces = mesh.interior_faces
    jumps = np.empty(len(faces))
    for i, f in enumerate(faces):
        (left, right), (left_edge, right_edge) = mesh.face_elements[f], mesh.face_local_edges[f]
        # the right element runs along the face against the canonical direction
        jumps[i] = np.abs(flux.normal_trace(left, left_edge, s) + flux.normal_trace(right, right_edge, 1.0 - s)).max()
    return jumps


def divergence_residuals(mesh: Mesh, flux: PostprocessedFlux, problem: ManufacturedProblem) -> np.ndarray:
    """(div sigma* + f, q)_T for the orthonormal basis q of P_{k+1}(T), (n_elements, dim P_{k+1})."""
    tables = fespace_tables(flux.k)
    rule = tables.cell_rule
    residuals = np.empty((mesh.n_elements, tables.n_u))
    for t in range(mesh.n_elements):
        geometry = mesh.geometry(t)
        values = flux.divergence(t, rule.points) + problem.f(geometry.to_physical(rule.points))
        residuals[t] = tables.phi.T @ (geometry.determinant * rule.weights * values)
    return residuals
