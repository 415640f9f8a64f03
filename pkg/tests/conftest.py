import numpy as np
import pytest

from functions.mesh.mesh import build_structured_mesh
from model.mesh import Mesh
from model.problems import ManufacturedProblem, linear_problem, paper_problem


def _zero(points):
    return np.zeros(np.shape(points)[:-1])


def _zero_vector(points):
    return np.zeros(np.shape(points))


def data_problem(f, c_scale=lambda x, y: np.ones_like(x)) -> ManufacturedProblem:
    """Problem defined by its data only: load f and c = c_scale I; u, sigma and g vanish."""

    def c(points):
        x, y = points[..., 0], points[..., 1]
        out = np.zeros(np.shape(points)[:-1] + (2, 2))
        out[..., 0, 0] = c_scale(x, y)
        out[..., 1, 1] = c_scale(x, y)
        return out

    return ManufacturedProblem(
        name="data",
        u=_zero,
        grad_u=_zero_vector,
        c=c,
        sigma=_zero_vector,
        f=lambda points: f(points[..., 0], points[..., 1]),
        g=_zero,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mesh1():
    return build_structured_mesh(1)


@pytest.fixture
def mesh2():
    return build_structured_mesh(2)


@pytest.fixture
def mesh4():
    return build_structured_mesh(4)


@pytest.fixture
def reference_mesh():
    """The reference triangle as a one-element mesh."""
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


@pytest.fixture
def paper():
    return paper_problem()


@pytest.fixture
def linear():
    return linear_problem()


@pytest.fixture
def unit_load():
    """f = 1 with c = I."""
    return data_problem(lambda x, y: np.ones_like(x))


@pytest.fixture
def polynomial_data():
    """Polynomial data that every assembly rule integrates exactly: f = 1 + xy, c = (1 + x^2 y^2) I."""
    return data_problem(lambda x, y: 1.0 + x * y, lambda x, y: 1.0 + x**2 * y**2)


@pytest.fixture
def scaled_coefficient():
    """c = 2 I."""
    return data_problem(lambda x, y: np.zeros_like(x), lambda x, y: np.full_like(x, 2.0))


@pytest.fixture
def indefinite_coefficient():
    return data_problem(lambda x, y: np.ones_like(x), lambda x, y: -np.ones_like(x))
