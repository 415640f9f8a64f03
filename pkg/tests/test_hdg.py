import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from functions.fespace.basis import fespace_tables
from functions.fespace.projection import l2_project, l2_project_vector, project_skeleton
from functions.hdg.local_system import assemble_local, condense, recover_local
from functions.hdg.solver import (
    apply_dirichlet,
    assemble_condensed,
    check_spd,
    hdg_residuals,
    solve_condensed,
    solve_hdg,
    solve_monolithic,
    trace_dof_map,
)
from functions.verify.oracles import integrate_local_residuals
from model.mesh import Mesh
from model.pydantic_models import HDGConfig, SolverMethod


def _random_local(rng, k):
    tables = fespace_tables(k)
    return (
        rng.standard_normal(tables.n_sigma),
        rng.standard_normal(tables.n_u),
        rng.standard_normal(tables.n_local_trace),
    )


def test_flux_mass_for_identity_coefficient(reference_mesh, unit_load):
    local = assemble_local(reference_mesh, 0, HDGConfig(k=0), unit_load)
    assert np.allclose(local.A, 0.5 * np.eye(2), atol=1e-15)
    assert np.allclose(local.B, 0.0)


def test_load_of_unit_source(reference_mesh, unit_load):
    local = assemble_local(reference_mesh, 0, HDGConfig(k=1), unit_load)
    expected = np.zeros_like(local.F)
    expected[0] = 0.5
    assert np.allclose(local.F, expected, atol=1e-14)


def test_penalty_equals_inverse_diameter(mesh2, paper):
    local = assemble_local(mesh2, 0, HDGConfig(k=1), paper)
    assert local.alpha == pytest.approx(np.sqrt(2.0))
    lengths = np.repeat(mesh2.edge_lengths[0], 2)
    assert np.allclose(local.H, local.alpha * np.diag(lengths))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_local_blocks_definiteness(mesh2, paper, k):
    local = assemble_local(mesh2, 3, HDGConfig(k=k), paper)
    assert np.linalg.eigvalsh(local.A).min() > 0.0
    assert np.allclose(local.E, local.E.T, atol=1e-14)
    assert np.linalg.eigvalsh(local.E).min() > -1e-12
    n = local.A.shape[0] + local.E.shape[0] + local.H.shape[0]
    assert local.full_matrix().shape == (n, n)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_local_residuals_match_direct_quadrature(mesh2, polynomial_data, rng, k):
    config = HDGConfig(k=k)
    for t in (0, 5):
        local = assemble_local(mesh2, t, config, polynomial_data)
        sigma, u, lam = _random_local(rng, k)
        expected = integrate_local_residuals(mesh2, t, config, polynomial_data, sigma, u, lam)
        for block, reference in zip(local.residuals(sigma, u, lam), expected):
            assert np.allclose(block, reference, atol=1e-11)


def test_non_spd_coefficient_is_rejected(mesh2, indefinite_coefficient):
    with pytest.raises(ValueError, match="positive definite"):
        assemble_local(mesh2, 0, HDGConfig(k=0), indefinite_coefficient)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_condensed_block_is_symmetric(mesh2, paper, k):
    block = condense(assemble_local(mesh2, 1, HDGConfig(k=k), paper))
    assert block.asymmetry < 1e-12
    # constant traces with u constant and sigma = 0 span its kernel
    eigenvalues = np.linalg.eigvalsh(block.schur)
    assert eigenvalues.min() > -1e-12 * eigenvalues.max()
    constant = np.zeros(block.schur.shape[0])
    constant[:: k + 1] = 1.0
    assert np.allclose(block.schur @ constant, 0.0, atol=1e-11)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_recovery_solves_interior_equations(mesh2, paper, rng, k):
    block = condense(assemble_local(mesh2, 6, HDGConfig(k=k), paper))
    lam = rng.standard_normal(block.schur.shape[0])
    u, sigma = recover_local(block, lam)
    r_sigma, r_u, r_lam = block.local.residuals(sigma, u, lam)
    assert np.abs(r_sigma).max() < 1e-11
    assert np.abs(r_u).max() < 1e-11
    assert np.allclose(r_lam, block.schur @ lam - block.reduced_load, atol=1e-10)


def test_single_square_gives_one_positive_unknown(mesh1, paper):
    system = assemble_condensed(mesh1, HDGConfig(k=0), paper)
    assert system.size == 1
    assert system.matrix[0, 0] > 0.0


def test_trace_dof_map_blocks_faces(mesh2):
    dof_map = trace_dof_map(mesh2, 2)
    assert dof_map.shape == (16, 3)
    assert dof_map[5, 1] == 5 * 3 + 1


def _bottom_faces(mesh):
    boundary = mesh.boundary_faces
    ends = mesh.vertices[mesh.faces[boundary]]
    bottom = np.flatnonzero(np.all(ends[:, :, 1] == 0.0, axis=1))
    return bottom[np.argsort(ends[bottom, :, 0].mean(axis=1))], ends


def test_dirichlet_means_of_linear_data(mesh2):
    values = apply_dirichlet(mesh2, lambda p: p[..., 0], 0)
    bottom, _ = _bottom_faces(mesh2)
    assert np.allclose(values[bottom, 0], [0.25, 0.75], atol=1e-14)


def test_dirichlet_projection_of_sine(mesh2):
    values = apply_dirichlet(mesh2, lambda p: np.sin(np.pi * p[..., 0]), 1)
    bottom, ends = _bottom_faces(mesh2)
    for index in bottom:
        a, b = ends[index, :, 0]
        omega = np.pi * (b - a)
        mean = (np.cos(np.pi * a) - np.cos(np.pi * b)) / omega
        first = -np.cos(np.pi * b) / omega + (np.sin(np.pi * b) - np.sin(np.pi * a)) / omega**2
        assert values[index, 0] == pytest.approx(mean, abs=1e-9)
        assert values[index, 1] == pytest.approx(np.sqrt(3.0) * (2.0 * first - mean), abs=1e-9)


def test_zero_dirichlet_data(mesh2):
    assert np.all(apply_dirichlet(mesh2, lambda p: np.zeros(p.shape[:-1]), 2) == 0.0)


def test_zero_right_hand_side_gives_zero(mesh2, paper):
    system = assemble_condensed(mesh2, HDGConfig(k=1), paper)
    x, residual = solve_condensed(dataclasses.replace(system, rhs=np.zeros_like(system.rhs)))
    assert np.all(x == 0.0)
    assert residual == 0.0


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_condensed_matrix_is_spd(mesh4, paper, k):
    system = assemble_condensed(mesh4, HDGConfig(k=k), paper)
    symmetry, positive = check_spd(system)
    assert symmetry < 1e-12
    assert positive
    assert system.local_asymmetry < 1e-12


def test_raw_schur_is_kept_alongside_symmetrised(mesh2, paper):
    block = condense(assemble_local(mesh2, 3, HDGConfig(k=2), paper))
    assert np.allclose(block.schur, 0.5 * (block.raw_schur + block.raw_schur.T), rtol=0.0, atol=1e-15)
    assert np.abs(block.raw_schur - block.schur).max() <= block.asymmetry * np.abs(block.raw_schur).max()


def test_asymmetric_assembly_is_reported(mesh2, paper):
    system = assemble_condensed(mesh2, HDGConfig(k=1), paper)
    scale = abs(system.unsymmetrised).max()
    kick = sp.csr_matrix(([1e-6 * scale], ([0], [1])), shape=system.unsymmetrised.shape)
    symmetry, positive = check_spd(dataclasses.replace(system, unsymmetrised=system.unsymmetrised + kick))
    assert symmetry > 1e-7
    assert positive


@pytest.mark.parametrize("sign, expected", [(1.0, True), (-1.0, False)])
def test_sparse_definiteness_branch(monkeypatch, mesh4, paper, sign, expected):
    monkeypatch.setattr("functions.hdg.solver.MAX_DENSE_CHECK", 0)
    system = assemble_condensed(mesh4, HDGConfig(k=1), paper)
    flipped = dataclasses.replace(system, matrix=sign * system.matrix, unsymmetrised=sign * system.unsymmetrised)
    symmetry, positive = check_spd(flipped)
    assert symmetry < 1e-12
    assert positive is expected


@pytest.mark.parametrize("k", [0, 1, 2])
def test_single_element_all_dirichlet(reference_mesh, linear, k):
    system = assemble_condensed(reference_mesh, HDGConfig(k=k), linear)
    assert system.size == 0
    solution = solve_hdg(reference_mesh, HDGConfig(k=k), linear)
    assert solution.residual == 0.0
    assert np.allclose(solution.u, l2_project(linear.u, k + 1, reference_mesh), atol=1e-11)
    assert np.allclose(solution.sigma, l2_project_vector(linear.sigma, k, reference_mesh), atol=1e-11)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_recovery_from_zero_data(mesh2, scaled_coefficient, k):
    block = condense(assemble_local(mesh2, 5, HDGConfig(k=k), scaled_coefficient))
    u, sigma = recover_local(block, np.zeros(block.schur.shape[0]))
    assert np.all(u == 0.0)
    assert np.all(sigma == 0.0)


def test_direct_solve_residual(mesh4, paper):
    solution = solve_hdg(mesh4, HDGConfig(k=1), paper)
    assert solution.residual <= 1e-12


def test_conjugate_gradients_agree_with_direct(mesh2, paper):
    direct = solve_hdg(mesh2, HDGConfig(k=1), paper)
    iterative = solve_hdg(mesh2, HDGConfig(k=1, solver=SolverMethod.CG), paper)
    assert np.allclose(iterative.lam, direct.lam, atol=1e-9)
    assert np.allclose(iterative.u, direct.u, atol=1e-9)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_linear_solution_is_reproduced(mesh2, linear, k):
    solution = solve_hdg(mesh2, HDGConfig(k=k), linear)
    assert np.allclose(solution.lam, project_skeleton(linear.u, k, mesh2), atol=1e-11)
    assert np.allclose(solution.u, l2_project(linear.u, k + 1, mesh2), atol=1e-11)
    assert np.allclose(solution.sigma, l2_project_vector(linear.sigma, k, mesh2), atol=1e-11)


@pytest.mark.parametrize("k", [0, 1])
def test_condensation_matches_monolithic_solve(mesh2, paper, k):
    condensed = solve_hdg(mesh2, HDGConfig(k=k), paper)
    monolithic = solve_monolithic(mesh2, HDGConfig(k=k), paper)
    assert np.allclose(condensed.lam, monolithic.lam, atol=1e-10)
    assert np.allclose(condensed.u, monolithic.u, atol=1e-10)
    assert np.allclose(condensed.sigma, monolithic.sigma, atol=1e-10)


def test_solution_is_independent_of_element_order(mesh2, paper, rng):
    permutation = rng.permutation(mesh2.n_elements)
    shuffled = Mesh(mesh2.vertices, mesh2.triangles[permutation])
    config = HDGConfig(k=1)
    original = solve_hdg(mesh2, config, paper)
    renumbered = solve_hdg(shuffled, config, paper)
    assert np.allclose(renumbered.lam, original.lam, atol=1e-10)
    assert np.allclose(renumbered.u, original.u[permutation], atol=1e-10)
    assert np.allclose(renumbered.sigma, original.sigma[permutation], atol=1e-10)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_scheme_residuals_vanish(mesh4, paper, k):
    config = HDGConfig(k=k)
    residuals = hdg_residuals(mesh4, config, paper, solve_hdg(mesh4, config, paper))
    assert set(residuals) == {"flux", "potential", "trace", "conservation"}
    assert max(residuals.values()) < 1e-10


def test_boundary_traces_hold_dirichlet_data(mesh2, linear):
    solution = solve_hdg(mesh2, HDGConfig(k=1), linear)
    assert np.array_equal(solution.lam[mesh2.boundary_faces], apply_dirichlet(mesh2, linear.g, 1))
