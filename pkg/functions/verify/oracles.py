"""Direct-quadrature residuals of the HDG equations, independent of the local block matrices."""

from typing import Tuple

import numpy as np

from functions.fespace.basis import edge_basis, reference_edge_points, scalar_basis, scalar_dim
from functions.fespace.quadrature import quad_edge, quad_triangle
from model.mesh import Mesh
from model.problems import ManufacturedProblem
from model.pydantic_models import HDGConfig

# extra exactness over the assembly rules
ORACLE_MARGIN = 8


def integrate_local_residuals(
    mesh: Mesh,
    element_id: int,
    config: HDGConfig,
    problem: ManufacturedProblem,
    sigma: np.ndarray,
    u: np.ndarray,
    lam_local: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Residuals of the flux, potential and trace equations on one element,
    tested with every local basis function.
    """
    k = config.k
    geometry = mesh.geometry(element_id)
    signs = mesh.element_face_signs[element_id]
    alpha = config.alpha(geometry.h_T)
    potential = scalar_basis(k + 1)
    n_psi = scalar_dim(k)
    mu_basis = edge_basis(k)
    lam_local = np.asarray(lam_local).reshape(3, k + 1)
    sigma_xy = np.asarray(sigma).reshape(2, n_psi)

    cell = quad_triangle(2 * k + 2 + ORACLE_MARGIN)
    points = geometry.to_physical(cell.points)
    weights = geometry.determinant * cell.weights
    phi = potential.values(cell.points)
    grad_phi = potential.gradients(cell.points) @ geometry.inverse_jacobian
    psi, grad_psi = phi[:, :n_psi], grad_phi[:, :n_psi]

    sigma_values = psi @ sigma_xy.T
    c_sigma = np.einsum("qab,qb->qa", problem.c(points), sigma_values)
    u_values = phi @ u
    div_sigma = sum(grad_psi[:, :, c] @ sigma_xy[c] for c in range(2))

    r_sigma = np.concatenate(
        [psi.T @ (weights * c_sigma[:, c]) + grad_psi[:, :, c].T @ (weights * u_values) for c in range(2)]
    )
    r_u = -phi.T @ (weights * div_sigma) - phi.T @ (weights * problem.f(points))
    r_lam = np.zeros((3, k + 1))

    edge = quad_edge(2 * k + 2 + ORACLE_MARGIN)
    for e in range(3):
        length = geometry.edge_lengths[e]
        normal = geometry.outward_normals[e]
        t = edge.points if signs[e] > 0 else 1.0 - edge.points
        mu = mu_basis.values(t)
        edge_phi = potential.values(reference_edge_points(e, edge.points))
        w = length * edge.weights

        lam_values = mu @ lam_local[e]
        # projection of the potential trace onto P_k(F)
        trace_values = mu @ (mu.T @ (edge.weights * (edge_phi @ u)))
        penalty = alpha * (trace_values - lam_values)
        normal_flux = (edge_phi[:, :n_psi] @ sigma_xy.T) @ normal

        for c in range(2):
            r_sigma[c * n_psi : (c + 1) * n_psi] -= normal[c] * (edge_phi[:, :n_psi].T @ (w * lam_values))
        r_u += edge_phi.T @ (w * penalty)
        r_lam[e] = mu.T @ (w * (normal_flux - penalty))

    return r_sigma, r_u, r_lam.ravel()
