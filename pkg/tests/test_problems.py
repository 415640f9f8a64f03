import numpy as np
import pytest

from model.problems import ANISOTROPIC_TENSOR, anisotropic_problem, get_problem, linear_problem, paper_problem
from model.pydantic_models import ProblemName

STEP = 1e-5


def _divergence(field, points):
    total = np.zeros(len(points))
    for d in range(2):
        shift = np.zeros(2)
        shift[d] = STEP
        total += (field(points + shift)[:, d] - field(points - shift)[:, d]) / (2.0 * STEP)
    return total


@pytest.fixture
def points(rng):
    return rng.uniform(0.05, 0.95, size=(20, 2))


def test_paper_values_at_centre(paper):
    centre = np.array([[0.5, 0.5]])
    assert paper.u(centre)[0] == pytest.approx(1.0)
    assert np.allclose(paper.sigma(centre), 0.0, atol=1e-15)
    assert np.allclose(paper.c(centre)[0], (1.0 + 1.0 / 16.0) * np.eye(2))


@pytest.mark.parametrize("factory", [paper_problem, anisotropic_problem, linear_problem])
def test_flux_is_scaled_gradient(factory, points):
    problem = factory()
    c_sigma = np.einsum("qab,qb->qa", problem.c(points), problem.sigma(points))
    assert np.allclose(c_sigma, problem.grad_u(points), atol=1e-13)


@pytest.mark.parametrize("factory", [paper_problem, anisotropic_problem, linear_problem])
def test_source_is_negative_flux_divergence(factory, points):
    problem = factory()
    scale = 1.0 + np.abs(problem.f(points)).max()
    assert np.allclose(problem.f(points), -_divergence(problem.sigma, points), atol=1e-6 * scale)
    assert np.allclose(problem.div_sigma(points), -problem.f(points))


def test_boundary_data_matches_solution(paper, linear):
    t = np.linspace(0.0, 1.0, 7)
    boundary = np.concatenate(
        [np.column_stack([t, 0 * t]), np.column_stack([t, 0 * t + 1]), np.column_stack([0 * t, t])]
    )
    assert np.allclose(paper.g(boundary), paper.u(boundary), atol=1e-15)
    assert np.allclose(linear.g(boundary), linear.u(boundary))


def test_anisotropic_tensor_is_spd():
    assert np.allclose(ANISOTROPIC_TENSOR, ANISOTROPIC_TENSOR.T)
    assert np.linalg.eigvalsh(ANISOTROPIC_TENSOR).min() > 0.0


def test_problems_accept_element_shaped_points(paper):
    points = np.zeros((4, 3, 2))
    assert paper.u(points).shape == (4, 3)
    assert paper.sigma(points).shape == (4, 3, 2)
    assert paper.c(points).shape == (4, 3, 2, 2)


def test_get_problem():
    for name in ProblemName:
        assert get_problem(name.value).name == name.value
    with pytest.raises(ValueError, match="Unknown problem"):
        get_problem("poisson")
