import numpy as np
import pytest

from functions.fespace.basis import scalar_basis
from functions.fespace.projection import mass_matrix
from functions.fespace.quadrature import quad_edge, quad_triangle
from functions.fespace.raviart_thomas import element_rt_basis, rt_basis
from functions.mesh.mesh import build_structured_mesh, refine_uniform
from model.pydantic_models import MeshPattern


@pytest.mark.parametrize("k, dim", [(0, 8), (1, 15), (2, 24), (3, 35)])
def test_dimension(mesh2, k, dim):
    basis = element_rt_basis(k, mesh2, 0)
    assert basis.dim == dim
    assert basis.n_edge_dofs + 2 * basis.n_interior_scalar == dim
    assert basis.dof_matrix.shape == (dim, dim)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("pattern", list(MeshPattern))
def test_degrees_of_freedom_are_unisolvent(k, pattern):
    mesh = refine_uniform(build_structured_mesh(2, pattern))
    for t in range(mesh.n_elements):
        basis = element_rt_basis(k, mesh, t)
        assert np.linalg.cond(basis.dof_matrix) < 1e10


@pytest.mark.parametrize("k", [0, 1, 2])
def test_divergence_lies_in_potential_space(mesh2, k):
    basis = element_rt_basis(k, mesh2, 5)
    m = k + 1
    rule = quad_triangle(2 * m + 4)
    divergence = basis.divergence(rule.points)
    phi = scalar_basis(m).values(rule.points)
    coefficients = np.linalg.solve(mass_matrix(m, rule), phi.T @ (2.0 * rule.weights[:, None] * divergence))
    assert np.allclose(phi @ coefficients, divergence, atol=1e-10)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_divergence_theorem(mesh2, k):
    basis = element_rt_basis(k, mesh2, 2)
    geometry = mesh2.geometry(2)
    cell = quad_triangle(2 * k + 4)
    volume = geometry.determinant * cell.weights @ basis.divergence(cell.points)
    edge = quad_edge(2 * k + 4)
    boundary = np.zeros(basis.dim)
    for e in range(3):
        traces = np.stack([basis.normal_trace(c, e, edge.points) for c in np.eye(basis.dim)], axis=1)
        boundary += geometry.edge_lengths[e] * edge.weights @ traces
    assert np.allclose(volume, boundary, atol=1e-11)


def test_solve_inverts_degrees_of_freedom(mesh2, rng):
    basis = element_rt_basis(1, mesh2, 4)
    coefficients = rng.standard_normal(basis.dim)

    def field(points):
        return basis.field_values(coefficients, points)

    assert np.allclose(basis.solve(basis.moments(field)), coefficients, atol=1e-10)


def test_edge_moments_use_canonical_direction(mesh2, rng):
    # a shared face carries the same moments seen from both neighbours
    face = mesh2.interior_faces[0]
    (left, right), (left_edge, right_edge) = mesh2.face_elements[face], mesh2.face_local_edges[face]
    k = 1
    left_basis = element_rt_basis(k, mesh2, left)
    right_basis = element_rt_basis(k, mesh2, right)
    constant = rng.standard_normal(2)

    def field(points):
        return np.broadcast_to(constant, points.shape).copy()

    n_edge = k + 2
    left_moments = left_basis.moments(field)[left_edge * n_edge : (left_edge + 1) * n_edge]
    right_moments = right_basis.moments(field)[right_edge * n_edge : (right_edge + 1) * n_edge]
    assert np.allclose(left_moments, -right_moments, atol=1e-13)


def test_unsupported_degree(mesh2):
    with pytest.raises(ValueError):
        rt_basis(4, mesh2.geometry(0))
    with pytest.raises(ValueError):
        rt_basis(-1, mesh2.geometry(0))
