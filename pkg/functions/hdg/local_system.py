"""
Element matrices of the HDG scheme and their static condensation.

Unknowns of one element are ordered (sigma, u, lambda): the flux in
[P_k(T)]^2 (component-major), the potential in P_{k+1}(T) and the trace
coefficients of its three edges in P_k(F). Test functions follow the same
order, so the local matrix is

    [[ A,   B,   -C ],
     [-B^T, E,   -G ],
     [ C^T, -G^T, H ]]

with right-hand side (0, F, 0).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from functions.fespace.basis import fespace_tables
from model.mesh import Mesh
from model.problems import ManufacturedProblem
from model.pydantic_models import HDGConfig

# relative to the largest eigenvalue
SPD_TOLERANCE = 1e-12


@dataclass
class LocalSystem:
    element_id: int
    alpha: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray
    G: np.ndarray
    H: np.ndarray
    F: np.ndarray

    @property
    def interior_block(self) -> np.ndarray:
        return np.block([[self.A, self.B], [-self.B.T, self.E]])

    @property
    def interior_trace_block(self) -> np.ndarray:
        return np.vstack([-self.C, -self.G])

    @property
    def trace_interior_block(self) -> np.ndarray:
        return np.hstack([self.C.T, -self.G.T])

    @property
    def interior_load(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.A.shape[0]), self.F])

    def full_matrix(self) -> np.ndarray:
        return np.block(
            [
                [self.A, self.B, -self.C],
                [-self.B.T, self.E, -self.G],
                [self.C.T, -self.G.T, self.H],
            ]
        )

    def residuals(self, sigma: np.ndarray, u: np.ndarray, lam: np.ndarray):
        """Element residuals of the three equations for given local coefficients."""
        r_sigma = self.A @ sigma + self.B @ u - self.C @ lam
        r_u = -self.B.T @ sigma + self.E @ u - self.G @ lam - self.F
        r_lam = self.C.T @ sigma - self.G.T @ u + self.H @ lam
        return r_sigma, r_u, r_lam


def _check_coefficient(c_values: np.ndarray, element_id: int):
    asymmetry = np.abs(c_values - np.swapaxes(c_values, -1, -2)).max()
    scale = np.abs(c_values).max()
    if asymmetry > SPD_TOLERANCE * max(scale, 1.0):
        raise ValueError(f"Coefficient c is not symmetric on element {element_id} (asymmetry {asymmetry:.3e})")
    eigenvalues = np.linalg.eigvalsh(c_values)
    if eigenvalues.min() <= SPD_TOLERANCE * eigenvalues.max():
        raise ValueError(
            f"Coefficient c is not positive definite on element {element_id} "
            f"(smallest eigenvalue {eigenvalues.min():.3e})"
        )


def assemble_local(mesh: Mesh, element_id: int, config: HDGConfig, problem: ManufacturedProblem) -> LocalSystem:
    tables = fespace_tables(config.k)
    geometry = mesh.geometry(element_id)
    signs = mesh.element_face_signs[element_id]
    alpha = config.alpha(geometry.h_T)
    n_psi = tables.n_flux_scalar

    rule = tables.cell_rule
    points = geometry.to_physical(rule.points)
    weights = geometry.determinant * rule.weights
    c_values = problem.c(points)
    _check_coefficient(c_values, element_id)

    phi = tables.phi
    psi = phi[:, :n_psi]
    grad_psi = tables.dphi[:, :n_psi, :] @ geometry.inverse_jacobian

    A = np.empty((2 * n_psi, 2 * n_psi))
    for a in range(2):
        for b in range(2):
            A[a * n_psi : (a + 1) * n_psi, b * n_psi : (b + 1) * n_psi] = psi.T @ (
                (weights * c_values[:, a, b])[:, None] * psi
            )

    # B[(c, i), l] = (phi_l, d_c psi_i)_T
    B = np.vstack([grad_psi[:, :, c].T @ (weights[:, None] * phi) for c in range(2)])
    F = phi.T @ (weights * problem.f(points))

    n_t = tables.n_trace
    w_edge = tables.edge_rule.weights
    C = np.zeros((2 * n_psi, 3 * n_t))
    G = np.zeros((tables.n_u, 3 * n_t))
    E = np.zeros((tables.n_u, tables.n_u))
    H = np.zeros((3 * n_t, 3 * n_t))
    for e in range(3):
        length = geometry.edge_lengths[e]
        normal = geometry.outward_normals[e]
        mu = tables.edge_mu[int(signs[e])]
        # Q[m, i] = <mu_m, phi_i>_F
        Q = length * mu.T @ (w_edge[:, None] * tables.edge_phi[e])
        block = slice(e * n_t, (e + 1) * n_t)
        for c in range(2):
            C[c * n_psi : (c + 1) * n_psi, block] = normal[c] * Q[:, :n_psi].T
        G[:, block] = alpha * Q.T
        E += alpha * Q.T @ Q / length
        H[block, block] = alpha * length * np.eye(n_t)

    return LocalSystem(element_id=element_id, alpha=alpha, A=A, B=B, C=C, E=E, G=G, H=H, F=F)


@dataclass
class CondensedBlock:
    """Trace Schur complement of one element and what recovery needs."""

    element_id: int
    schur: np.ndarray
    raw_schur: np.ndarray
    reduced_load: np.ndarray
    asymmetry: float
    local: LocalSystem
    factor: tuple


def condense(local: LocalSystem) -> CondensedBlock:
    """
    Eliminate (sigma, u): S = H - K_li K_ii^{-1} K_il and r = -K_li K_ii^{-1} F_i.
    S is returned symmetrised; the raw S and its relative asymmetry are kept for checks.
    """
    interior = local.interior_block
    try:
        factor = lu_factor(interior, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise LinAlgError(f"Interior block of element {local.element_id} could not be factorised: {e}")
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() <= 1e-14 * pivots.max():
        raise LinAlgError(
            f"Interior block of element {local.element_id} is singular (smallest pivot {pivots.min():.3e})"
        )

    trace_interior = local.trace_interior_block
    schur = local.H - trace_interior @ lu_solve(factor, local.interior_trace_block)
    reduced_load = -trace_interior @ lu_solve(factor, local.interior_load)

    asymmetry = float(np.abs(schur - schur.T).max() / np.abs(schur).max())
    return CondensedBlock(
        element_id=local.element_id,
        schur=0.5 * (schur + schur.T),
        raw_schur=schur,
        reduced_load=reduced_load,
        asymmetry=asymmetry,
        local=local,
        factor=factor,
    )


def recover_local(block: CondensedBlock, lam_local: np.ndarray):
    """(u, sigma) of one element from its trace coefficients, ordered (edge, mode)."""
    local = block.local
    rhs = local.interior_load - local.interior_trace_block @ np.ravel(lam_local)
    solution = lu_solve(block.factor, rhs)
    n_sigma = local.A.shape[0]
    return solution[n_sigma:], solution[:n_sigma]
