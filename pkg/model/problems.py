"""Manufactured problems for -div(c^{-1} grad u) = f with u = g on the unit square.

Every closed form takes an array of points with a trailing axis of length 2 and
evaluates pointwise.
"""

from typing import Callable, Dict

import numpy as np
from pydantic import BaseModel, ConfigDict

from model.pydantic_models import ProblemName

PointFunction = Callable[[np.ndarray], np.ndarray]


class ManufacturedProblem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    u: PointFunction
    grad_u: PointFunction
    c: PointFunction
    sigma: PointFunction
    f: PointFunction
    g: PointFunction

    def div_sigma(self, points: np.ndarray) -> np.ndarray:
        return -self.f(points)


def _split(points: np.ndarray):
    points = np.asarray(points, dtype=float)
    return points[..., 0], points[..., 1]


def _identity_field(points: np.ndarray, scale: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(scale) + (2, 2))
    out[..., 0, 0] = scale
    out[..., 1, 1] = scale
    return out


def paper_problem() -> ManufacturedProblem:
    """u = sin(pi x) sin(pi y) with c = (1 + x^2 y^2) I."""
    pi = np.pi

    def u(points):
        x, y = _split(points)
        return np.sin(pi * x) * np.sin(pi * y)

    def grad_u(points):
        x, y = _split(points)
        return np.stack(
            [pi * np.cos(pi * x) * np.sin(pi * y), pi * np.sin(pi * x) * np.cos(pi * y)],
            axis=-1,
        )

    def weight(points):
        x, y = _split(points)
        return 1.0 + x**2 * y**2

    def c(points):
        return _identity_field(points, weight(points))

    def sigma(points):
        return grad_u(points) / weight(points)[..., None]

    def f(points):
        x, y = _split(points)
        w = weight(points)
        grad_w = np.stack([2.0 * x * y**2, 2.0 * x**2 * y], axis=-1)
        return 2.0 * pi**2 * u(points) / w + np.sum(grad_w * grad_u(points), axis=-1) / w**2

    def g(points):
        x, _ = _split(points)
        return np.zeros_like(x)

    return ManufacturedProblem(name=ProblemName.PAPER.value, u=u, grad_u=grad_u, c=c, sigma=sigma, f=f, g=g)


def linear_problem() -> ManufacturedProblem:
    """u = x + y with c = I; every HDG space reproduces it exactly."""

    def u(points):
        x, y = _split(points)
        return x + y

    def grad_u(points):
        x, _ = _split(points)
        return np.stack([np.ones_like(x), np.ones_like(x)], axis=-1)

    def c(points):
        x, _ = _split(points)
        return _identity_field(points, np.ones_like(x))

    def f(points):
        x, _ = _split(points)
        return np.zeros_like(x)

    return ManufacturedProblem(name=ProblemName.LINEAR.value, u=u, grad_u=grad_u, c=c, sigma=grad_u, f=f, g=u)


ANISOTROPIC_TENSOR = np.array([[2.0, 0.5], [0.5, 1.0]])


def anisotropic_problem() -> ManufacturedProblem:
    """u = sin(pi x) sin(pi y) with a constant full SPD tensor c."""
    pi = np.pi
    inverse = np.linalg.inv(ANISOTROPIC_TENSOR)
    paper = paper_problem()

    def c(points):
        x, _ = _split(points)
        return np.broadcast_to(ANISOTROPIC_TENSOR, np.shape(x) + (2, 2)).copy()

    def sigma(points):
        return paper.grad_u(points) @ inverse.T

    def f(points):
        x, y = _split(points)
        u_xx = -(pi**2) * np.sin(pi * x) * np.sin(pi * y)
        u_xy = pi**2 * np.cos(pi * x) * np.cos(pi * y)
        return -(inverse[0, 0] * u_xx + 2.0 * inverse[0, 1] * u_xy + inverse[1, 1] * u_xx)

    return ManufacturedProblem(
        name=ProblemName.ANISOTROPIC.value,
        u=paper.u,
        grad_u=paper.grad_u,
        c=c,
        sigma=sigma,
        f=f,
        g=paper.g,
    )


PROBLEMS: Dict[ProblemName, Callable[[], ManufacturedProblem]] = {
    ProblemName.PAPER: paper_problem,
    ProblemName.LINEAR: linear_problem,
    ProblemName.ANISOTROPIC: anisotropic_problem,
}


def get_problem(name: str) -> ManufacturedProblem:
    try:
        problem_name = ProblemName(name)
    except ValueError:
        known = ", ".join(p.value for p in ProblemName)
        raise ValueError(f"Unknown problem '{name}', expected one of: {known}")
    return PROBLEMS[problem_name]()
