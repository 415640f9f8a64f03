import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError
from scipy.sparse.linalg import LinearOperator, cg, spsolve, splu

from functions.fespace.basis import fespace_tables
from functions.fespace.projection import project_skeleton
from functions.hdg.local_system import CondensedBlock, assemble_local, condense, recover_local
from model.mesh import Mesh
from model.problems import ManufacturedProblem
from model.pydantic_models import HDGConfig, SolverMethod

RESIDUAL_TARGET = 1e-12
RESIDUAL_FAILURE = 1e-8
MAX_REFINEMENT_STEPS = 3
# larger systems are checked with a sparse symmetric factorisation
MAX_DENSE_CHECK = 3000


@dataclass
class HDGSolution:
    """
    lam: (n_faces, k+1) trace coefficients in canonical face parameters,
    boundary faces holding the projection of g.
    u: (n_elements, dim P_{k+1}) potential coefficients.
    sigma: (n_elements, 2 dim P_k) flux coefficients, component-major.
    """

    k: int
    lam: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    residual: float = 0.0


@dataclass
class CondensedSystem:
    k: int
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray
    interior_dofs: np.ndarray
    boundary_dofs: np.ndarray
    boundary_values: np.ndarray
    blocks: List[CondensedBlock] = field(default_factory=list, repr=False)
    local_asymmetry: float = 0.0
    # interior block assembled from the raw Schur complements, before symmetrisation
    unsymmetrised: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.interior_dofs)


def trace_dof_map(mesh: Mesh, k: int) -> np.ndarray:
    """Global index of mode m on face f is f * (k+1) + m."""
    return np.arange(mesh.n_faces * (k + 1)).reshape(mesh.n_faces, k + 1)


def apply_dirichlet(mesh: Mesh, g: Callable[[np.ndarray], np.ndarray], k: int) -> np.ndarray:
    """(n_boundary_faces, k+1) L2(F) projections of g onto P_k(F), in mesh.boundary_faces order."""
    boundary = mesh.boundary_faces
    if len(boundary) == 0:
        return np.zeros((0, k + 1))
    values = project_skeleton(g, k, mesh)
    return values[boundary]


def assemble_condensed(mesh: Mesh, config: HDGConfig, problem: ManufacturedProblem) -> CondensedSystem:
    k = config.k
    n_t = k + 1
    dof_map = trace_dof_map(mesh, k)
    n_dofs = dof_map.size
    n_local = 3 * n_t

    rows, cols, values, raw_values = [], [], [], []
    load = np.zeros(n_dofs)
    blocks = []
    for t in range(mesh.n_elements):
        block = condense(assemble_local(mesh, t, config, problem))
        dofs = dof_map[mesh.element_faces[t]].ravel()
        rows.append(np.repeat(dofs, n_local))
        cols.append(np.tile(dofs, n_local))
        values.append(block.schur.ravel())
        raw_values.append(block.raw_schur.ravel())
        load[dofs] += block.reduced_load
        blocks.append(block)

    rows, cols = np.concatenate(rows), np.concatenate(cols)
    # duplicates are summed in element order
    full = sp.coo_matrix((np.concatenate(values), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    raw = sp.coo_matrix((np.concatenate(raw_values), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()

    interior_dofs = dof_map[mesh.interior_faces].ravel()
    boundary_dofs = dof_map[mesh.boundary_faces].ravel()
    boundary_values = apply_dirichlet(mesh, problem.g, k).ravel()

    matrix = full[interior_dofs][:, interior_dofs].tocsr()
    unsymmetrised = raw[interior_dofs][:, interior_dofs].tocsr()
    rhs = load[interior_dofs] - full[interior_dofs][:, boundary_dofs] @ boundary_values

    local_asymmetry = max(b.asymmetry for b in blocks)
    logging.debug(
        f"Condensed system k={k}: {len(interior_dofs)} unknowns, {matrix.nnz} non-zeros, "
        f"local asymmetry {local_asymmetry:.2e}"
    )
    return CondensedSystem(
        k=k,
        matrix=matrix,
        rhs=rhs,
        dof_map=dof_map,
        interior_dofs=interior_dofs,
        boundary_dofs=boundary_dofs,
        boundary_values=boundary_values,
        blocks=blocks,
        local_asymmetry=local_asymmetry,
        unsymmetrised=unsymmetrised,
    )


def _diagnostics(matrix: sp.csr_matrix) -> Dict[str, float]:
    scale = abs(matrix).max() if matrix.nnz else 1.0
    asymmetry = abs(matrix - matrix.T).max() / scale if matrix.nnz else 0.0
    diagonal = matrix.diagonal()
    return {
        "symmetry_error": float(asymmetry),
        "min_diagonal": float(diagonal.min()) if len(diagonal) else 0.0,
    }


def _relative_residual(matrix: sp.csr_matrix, x: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(matrix @ x - b) / np.linalg.norm(b))


def _jacobi_preconditioner(matrix: sp.csr_matrix) -> LinearOperator:
    inverse_diagonal = 1.0 / matrix.diagonal()
    return LinearOperator(matrix.shape, matvec=lambda v: inverse_diagonal * np.ravel(v), dtype=float)


def solve_condensed(system: CondensedSystem, method: SolverMethod = SolverMethod.DIRECT) -> Tuple[np.ndarray, float]:
    """Interior trace coefficients and the relative residual ||Kx - b|| / ||b||."""
    matrix, b = system.matrix, system.rhs
    if system.size == 0 or not np.any(b):
        return np.zeros(system.size), 0.0

    if method == SolverMethod.DIRECT:
        try:
            factor = splu(matrix.tocsc())
        except RuntimeError as e:
            logging.error(f"Sparse factorisation failed: {_diagnostics(matrix)}")
            raise RuntimeError(f"Condensed system could not be factorised ({e}); diagnostics {_diagnostics(matrix)}")
        x = factor.solve(b)
        residual = _relative_residual(matrix, x, b)
        for _ in range(MAX_REFINEMENT_STEPS):
            if residual <= 0.1 * RESIDUAL_TARGET:
                break
            x = x + factor.solve(b - matrix @ x)
            residual = _relative_residual(matrix, x, b)
    else:
        x, info = cg(
            matrix,
            b,
            rtol=0.1 * RESIDUAL_TARGET,
            atol=0.0,
            maxiter=20 * system.size,
            M=_jacobi_preconditioner(matrix),
        )
        if info != 0:
            logging.warning(f"Conjugate gradients stopped with info={info}")
        residual = _relative_residual(matrix, x, b)

    if not np.isfinite(residual) or residual > RESIDUAL_FAILURE:
        logging.error(f"Condensed solve failed: residual {residual:.3e}")
        raise RuntimeError(
            f"Condensed solve with {method.value} reached residual {residual:.3e}; "
            f"diagnostics {_diagnostics(matrix)}"
        )
    if residual > RESIDUAL_TARGET:
        logging.warning(f"Condensed solve residual {residual:.3e} exceeds {RESIDUAL_TARGET:.0e}")
    logging.debug(f"Condensed solve ({method.value}): n={system.size}, residual {residual:.3e}")
    return x, residual


def check_spd(system: CondensedSystem) -> Tuple[float, bool]:
    """
    Relative symmetry error of the condensed matrix and whether it admits a Cholesky factorisation.
    The symmetry error is measured on the matrix assembled before local symmetrisation when available.
    """
    matrix = system.matrix
    if system.size == 0:
        return 0.0, True
    diagnostics = _diagnostics(matrix)
    if system.unsymmetrised is not None:
        diagnostics["symmetry_error"] = max(
            diagnostics["symmetry_error"], _diagnostics(system.unsymmetrised)["symmetry_error"]
        )

    if system.size <= MAX_DENSE_CHECK:
        dense = matrix.toarray()
        try:
            np.linalg.cholesky(0.5 * (dense + dense.T))
            positive = True
        except np.linalg.LinAlgError:
            positive = False
    else:
        # diagonal pivoting only, so the pivots are those of an LDL^T factorisation
        symmetric = (0.5 * (matrix + matrix.T)).tocsc()
        try:
            factor = splu(symmetric, diag_pivot_thresh=0.0, options={"SymmetricMode": True})
            positive = bool(np.all(factor.U.diagonal() > 0.0))
        except RuntimeError:
            positive = False

    logging.debug(f"SPD check: n={system.size}, {diagnostics}, cholesky={'ok' if positive else 'failed'}")
    return diagnostics["symmetry_error"], positive


def _recover(mesh: Mesh, system: CondensedSystem, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    tables = fespace_tables(system.k)
    u = np.empty((mesh.n_elements, tables.n_u))
    sigma = np.empty((mesh.n_elements, tables.n_sigma))
    for t, block in enumerate(system.blocks):
        u[t], sigma[t] = recover_local(block, lam[mesh.element_faces[t]])
    return u, sigma


def solve_hdg(
    mesh: Mesh,
    config: HDGConfig,
    problem: ManufacturedProblem,
    system: Optional[CondensedSystem] = None,
) -> HDGSolution:
    system = system or assemble_condensed(mesh, config, problem)
    interior, residual = solve_condensed(system, config.solver)

    values = np.empty(system.dof_map.size)
    values[system.interior_dofs] = interior
    values[system.boundary_dofs] = system.boundary_values
    lam = values.reshape(mesh.n_faces, config.k + 1)

    u, sigma = _recover(mesh, system, lam)
    logging.debug(f"Solved HDG k={config.k} on {mesh.n_elements} elements")
    return HDGSolution(k=config.k, lam=lam, u=u, sigma=sigma, residual=residual)


def solve_monolithic(mesh: Mesh, config: HDGConfig, problem: ManufacturedProblem) -> HDGSolution:
    """
    Solve for sigma, u and the interior traces at once from the uncondensed
    local matrices; an independent check of condensation and recovery.
    """
    k = config.k
    tables = fespace_tables(k)
    n_local = tables.n_sigma + tables.n_u
    n_interior = mesh.n_elements * n_local

    dof_map = trace_dof_map(mesh, k)
    trace_index = np.full(dof_map.size, -1, dtype=np.int64)
    interior_dofs = dof_map[mesh.interior_faces].ravel()
    trace_index[interior_dofs] = n_interior + np.arange(len(interior_dofs))
    boundary_dofs = dof_map[mesh.boundary_faces].ravel()
    lam_all = np.zeros(dof_map.size)
    lam_all[boundary_dofs] = apply_dirichlet(mesh, problem.g, k).ravel()

    n = n_interior + len(interior_dofs)
    rows, cols, values = [], [], []
    rhs = np.zeros(n)
    for t in range(mesh.n_elements):
        local = assemble_local(mesh, t, config, problem)
        matrix = local.full_matrix()
        traces = dof_map[mesh.element_faces[t]].ravel()
        own = t * n_local + np.arange(n_local)
        global_rows = np.concatenate([own, trace_index[traces]])

        local_rhs = np.concatenate([np.zeros(tables.n_sigma), local.F, np.zeros(len(traces))])
        # known boundary traces move to the right-hand side
        known = trace_index[traces] < 0
        local_rhs -= matrix[:, n_local:][:, known] @ lam_all[traces[known]]

        keep = global_rows >= 0
        sub = matrix[np.ix_(keep, keep)]
        kept = global_rows[keep]
        rows.append(np.repeat(kept, len(kept)))
        cols.append(np.tile(kept, len(kept)))
        values.append(sub.ravel())
        rhs[kept] += local_rhs[keep]

    system = sp.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsc()
    x = spsolve(system, rhs)
    if not np.all(np.isfinite(x)):
        raise LinAlgError("Monolithic HDG system is singular")

    lam_all[interior_dofs] = x[n_interior:]
    local_values = x[:n_interior].reshape(mesh.n_elements, n_local)
    return HDGSolution(
        k=k,
        lam=lam_all.reshape(mesh.n_faces, k + 1),
        u=local_values[:, tables.n_sigma :],
        sigma=local_values[:, : tables.n_sigma],
        residual=_relative_residual(system, x, rhs) if np.any(rhs) else 0.0,
    )


def hdg_residuals(
    mesh: Mesh, config: HDGConfig, problem: ManufacturedProblem, solution: HDGSolution
) -> Dict[str, float]:
    """
    Largest residuals of the scheme re-integrated from the local matrices:
    flux and potential equations per element, trace equation per interior face
    (the weak single-valuedness of the numerical normal flux) and the
    element-wise conservation identity.
    """
    k = config.k
    n_t = k + 1
    face_residual = np.zeros((mesh.n_faces, n_t))
    flux = potential = conservation = 0.0
    for t in range(mesh.n_elements):
        local = assemble_local(mesh, t, config, problem)
        lam = solution.lam[mesh.element_faces[t]].ravel()
        r_sigma, r_u, r_lam = local.residuals(solution.sigma[t], solution.u[t], lam)
        flux = max(flux, np.abs(r_sigma).max())
        potential = max(potential, np.abs(r_u).max())
        # phi_0 == 1 so the first potential equation is the conservation identity
        conservation = max(conservation, abs(r_u[0]))
        face_residual[mesh.element_faces[t]] += r_lam.reshape(3, n_t)

    interior = mesh.interior_faces
    trace = float(np.abs(face_residual[interior]).max()) if len(interior) else 0.0
    return {"flux": float(flux), "potential": float(potential), "trace": trace, "conservation": float(conservation)}
