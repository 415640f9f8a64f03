from typing import Dict, Optional

import numpy as np

from functions.fespace.basis import fespace_tables
from functions.fespace.projection import PiecewisePolynomial, physical_points
from functions.fespace.quadrature import QuadRule
from functions.hdg.solver import HDGSolution
from functions.postprocess.flux import PostprocessedFlux
from functions.verify.norms import flux_values
from model.mesh import Mesh
from model.problems import ManufacturedProblem


def compute_errors(
    mesh: Mesh,
    problem: ManufacturedProblem,
    solution: HDGSolution,
    flux: PostprocessedFlux,
    rule: Optional[QuadRule] = None,
) -> Dict[str, float]:
    """
    L2 errors ||u - u_h||, ||sigma - sigma_h||, ||sigma - sigma_h*|| and
    ||div sigma - div sigma_h*||, by element quadrature at the error-norm rule.
    Returns the four errors keyed err_u, err_sigma, err_sigma_star and err_div; the
    ConvergenceRow with observed orders is built from them in convergence._with_orders.
    """
    k = solution.k
    rule = rule or fespace_tables(k).error_rule
    points = physical_points(mesh, rule.points)
    weights = mesh.determinants[:, None] * rule.weights[None, :]

    u_h = PiecewisePolynomial(k + 1, solution.u).values(mesh, rule.points)
    err_u = np.sum(weights * (problem.u(points) - u_h) ** 2)

    sigma = problem.sigma(points)
    sigma_h = flux_values(k, solution.sigma, rule.points)
    err_sigma = np.sum(weights * np.sum((sigma - sigma_h) ** 2, axis=-1))

    div_sigma = problem.div_sigma(points)
    err_sigma_star = 0.0
    err_div = 0.0
    for t in range(mesh.n_elements):
        star = flux.values(t, rule.points)
        err_sigma_star += np.sum(weights[t] * np.sum((sigma[t] - star) ** 2, axis=-1))
        err_div += np.sum(weights[t] * (div_sigma[t] - flux.divergence(t, rule.points)) ** 2)

    return {
        "err_u": float(np.sqrt(err_u)),
        "err_sigma": float(np.sqrt(err_sigma)),
        "err_sigma_star": float(np.sqrt(err_sigma_star)),
        "err_div": float(np.sqrt(err_div)),
    }
