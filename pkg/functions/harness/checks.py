"""Invariant suite behind `hdg check`: every check returns a CheckResult instead of raising."""

import logging
from typing import Callable, List, Tuple

import numpy as np

from functions.fespace.basis import scalar_dim
from functions.fespace.projection import PiecewisePolynomial
from functions.fespace.quadrature import quad_triangle
from functions.harness.errors import compute_errors
from functions.hdg.solver import assemble_condensed, check_spd, hdg_residuals, solve_hdg, solve_monolithic
from functions.mesh.mesh import build_structured_mesh, check_mesh, refine_uniform
from functions.postprocess.flux import divergence_residuals, normal_jumps, postprocess_flux
from functions.verify.interpolation import enriched_space, pi0, pi1_stability_ratio, pi_h, pi_h_moment_residuals
from functions.verify.norms import error_triple, triple_norm
from model.problems import get_problem, linear_problem, paper_problem
from model.pydantic_models import CheckResult, HDGConfig, ProblemName

SEED = 20240607
# highest k at which the enriched interpolation space is assembled reliably
MAX_INTERPOLATION_DEGREE = 2


def _result(name: str, passed: bool, detail: str) -> CheckResult:
    level = logging.INFO if passed else logging.ERROR
    logging.log(level, f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def check_mesh_invariants(k: int) -> CheckResult:
    coarse = build_structured_mesh(2)
    problems = check_mesh(coarse) + check_mesh(refine_uniform(coarse))
    return _result("mesh", not problems, "; ".join(problems) or "Euler, areas, incidences and normals consistent")


def check_condensed_spd(k: int) -> CheckResult:
    config = HDGConfig(k=k)
    details = []
    passed = True
    for n in (1, 2, 4):
        system = assemble_condensed(build_structured_mesh(n), config, paper_problem())
        symmetry, positive = check_spd(system)
        ok = symmetry < 1e-12 and positive and system.local_asymmetry < 1e-12
        passed &= ok
        details.append(f"n={n}: sym {symmetry:.1e}, local {system.local_asymmetry:.1e}, chol {positive}")
    return _result("condensed SPD", passed, ", ".join(details))


def check_linear_exactness(k: int) -> CheckResult:
    config = HDGConfig(k=k)
    problem = linear_problem()
    worst = 0.0
    for n in (1, 2, 4):
        mesh = build_structured_mesh(n)
        solution = solve_hdg(mesh, config, problem)
        errors = compute_errors(mesh, problem, solution, postprocess_flux(mesh, solution))
        worst = max(worst, errors["err_u"], errors["err_sigma"], errors["err_sigma_star"])
    return _result("linear exactness", worst < 1e-11, f"largest error {worst:.2e}")


def check_condensation_equivalence(k: int) -> CheckResult:
    config = HDGConfig(k=k)
    problem = paper_problem()
    worst = 0.0
    for n in (1, 2, 4):
        mesh = build_structured_mesh(n)
        condensed = solve_hdg(mesh, config, problem)
        monolithic = solve_monolithic(mesh, config, problem)
        for field in ("lam", "u", "sigma"):
            worst = max(worst, np.abs(getattr(condensed, field) - getattr(monolithic, field)).max())
    return _result("condensation equivalence", worst < 1e-10, f"largest coefficient gap {worst:.2e}")


def check_scheme_residuals(k: int) -> CheckResult:
    config = HDGConfig(k=k)
    problem = paper_problem()
    mesh = build_structured_mesh(4)
    residuals = hdg_residuals(mesh, config, problem, solve_hdg(mesh, config, problem))
    worst = max(residuals.values())
    return _result("scheme residuals", worst < 1e-11, ", ".join(f"{k_} {v:.1e}" for k_, v in residuals.items()))


def check_postprocessing(k: int) -> CheckResult:
    config = HDGConfig(k=k)
    problem = paper_problem()
    mesh = build_structured_mesh(8)
    flux = postprocess_flux(mesh, solve_hdg(mesh, config, problem))

    scale = 1.0 + np.abs(flux.coefficients).max()
    jump = normal_jumps(mesh, flux).max() / scale
    residual = divergence_residuals(mesh, flux, problem)
    # size of the load moments (f, q)_T
    f_scale = np.abs(problem.f(mesh.centroids)).max() * mesh.areas.max()
    divergence = np.abs(residual).max() / f_scale
    passed = jump < 1e-9 and divergence < 1e-10
    return _result("postprocessed flux", passed, f"normal jump {jump:.1e}, divergence moments {divergence:.1e}")


def _interpolation_degree(k: int, name: str) -> Tuple[int, str]:
    if k <= MAX_INTERPOLATION_DEGREE:
        return k, ""
    logging.warning(f"{name}: requested k={k}, checking k={MAX_INTERPOLATION_DEGREE} instead")
    return MAX_INTERPOLATION_DEGREE, f" (clamped from {k})"


def check_interpolation(k: int, samples: int = 10) -> CheckResult:
    rng = np.random.default_rng(SEED)
    mesh = build_structured_mesh(2)
    k, note = _interpolation_degree(k, "interpolation moments")
    enriched_space(k)
    element_gap = face_gap = 0.0
    for _ in range(samples):
        v = PiecewisePolynomial(k + 1, rng.standard_normal((mesh.n_elements, scalar_dim(k + 1))))
        mu = rng.standard_normal((mesh.n_faces, k + 1))
        result = pi_h(v, mu, k, mesh)
        gaps = pi_h_moment_residuals(result, v, mu, k, mesh)
        element_gap, face_gap = max(element_gap, gaps[0]), max(face_gap, gaps[1])

    boundary = pi0(rng.standard_normal((mesh.n_faces, k + 1)), mesh).values[mesh.boundary_vertices]
    passed = element_gap < 1e-12 and face_gap < 1e-12 and np.all(boundary == 0.0)
    return _result(
        "interpolation moments",
        passed,
        f"k={k}{note}: element moments {element_gap:.1e}, face moments {face_gap:.1e}, boundary pi0 exact",
    )


def check_pi1_stability(k: int, samples: int = 20) -> CheckResult:
    k, note = _interpolation_degree(k, "pi1 stability")
    ratios = []
    for mesh in (build_structured_mesh(2), build_structured_mesh(4)):
        rng = np.random.default_rng(SEED)
        level = 0.0
        for _ in range(samples):
            t = int(rng.integers(mesh.n_elements))
            coefficients = rng.standard_normal(scalar_dim(k + 1))
            v = PiecewisePolynomial(k + 1, coefficients[None, :])
            mu = rng.standard_normal((3, k + 1))
            level = max(level, pi1_stability_ratio(lambda p: v.values(mesh, p)[0], mu, k, mesh, t))
        ratios.append(level)
    passed = 0.5 <= ratios[1] / ratios[0] <= 2.0
    return _result("pi1 stability", passed, f"k={k}{note}: largest ratio per level {ratios[0]:.3f}, {ratios[1]:.3f}")


def check_norm_homogeneity(k: int) -> CheckResult:
    mesh = build_structured_mesh(2)
    problem = paper_problem()
    err = error_triple(mesh, problem, solve_hdg(mesh, HDGConfig(k=k), problem))
    base = triple_norm(err, mesh, problem)
    scaled = triple_norm(err.scaled(-3.0), mesh, problem)
    gap = abs(scaled - 3.0 * base) / max(base, 1e-300)
    return _result("triple norm homogeneity", gap < 1e-13, f"relative gap {gap:.1e}")


def check_error_quadrature(k: int) -> CheckResult:
    mesh = build_structured_mesh(4)
    problem = get_problem(ProblemName.PAPER.value)
    solution = solve_hdg(mesh, HDGConfig(k=k), problem)
    flux = postprocess_flux(mesh, solution)
    coarse = compute_errors(mesh, problem, solution, flux)
    fine = compute_errors(mesh, problem, solution, flux, rule=quad_triangle(2 * (2 * (k + 2) + 6)))
    change = max(abs(fine[key] - coarse[key]) / fine[key] for key in coarse)
    return _result("error quadrature", change < 1e-3, f"largest relative change {change:.1e}")


CHECKS: List[Callable[[int], CheckResult]] = [
    check_mesh_invariants,
    check_condensed_spd,
    check_linear_exactness,
    check_condensation_equivalence,
    check_scheme_residuals,
    check_postprocessing,
    check_interpolation,
    check_pi1_stability,
    check_norm_homogeneity,
    check_error_quadrature,
]


def run_checks(k: int) -> List[CheckResult]:
    HDGConfig(k=k)
    results = []
    for check in CHECKS:
        try:
            results.append(check(k))
        except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
            results.append(_result(check.__name__, False, f"raised {type(e).__name__}: {e}"))
    return results
