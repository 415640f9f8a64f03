import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from functions.hdg.solver import solve_hdg
from functions.harness.errors import compute_errors
from functions.mesh.mesh import build_structured_mesh, refine_uniform
from functions.postprocess.flux import postprocess_flux
from functions.verify.norms import bound_terms, error_triple, triple_norm
from model.mesh import Mesh
from model.problems import ManufacturedProblem, get_problem
from model.pydantic_models import ConvergenceRow, HDGConfig, OutputFormat, StudyConfig
from utils import format_error, format_order, observed_order

BASE_COLUMNS = [
    "k",
    "h_inv",
    "err_u",
    "ord_u",
    "err_sigma",
    "ord_sigma",
    "err_sigma_star",
    "ord_sigma_star",
    "err_div",
    "ord_div",
]
EXTENDED_COLUMNS = ["err_triple", "ord_triple", "bound"]
ORDERED_ERRORS = ["u", "sigma", "sigma_star", "div", "triple"]


class ConvergenceTable:
    def __init__(self, rows: List[ConvergenceRow], extended: bool = False):
        self.rows = rows
        self.extended = extended

    @property
    def columns(self) -> List[str]:
        return BASE_COLUMNS + EXTENDED_COLUMNS if self.extended else BASE_COLUMNS

    def for_degree(self, k: int) -> List[ConvergenceRow]:
        return [row for row in self.rows if row.k == k]

    def to_dataframe(self) -> pd.DataFrame:
        """Formatted table: errors with 4 significant digits, orders with 3 decimals."""
        records = []
        for row in self.rows:
            record: Dict[str, str] = {"k": str(row.k), "h_inv": str(row.h_inv)}
            for column in self.columns[2:]:
                value = getattr(row, column)
                record[column] = format_order(value) if column.startswith("ord_") else format_error(value)
            records.append(record)
        return pd.DataFrame(records, columns=self.columns)

    def to_csv(self) -> str:
        return self.to_dataframe().to_csv(index=False, lineterminator="\n")

    def to_markdown(self) -> str:
        return self.to_dataframe().to_markdown(index=False) + "\n"

    def render(self, output_format: OutputFormat) -> str:
        return self.to_csv() if output_format == OutputFormat.CSV else self.to_markdown()

    def write(self, path: str, output_format: OutputFormat) -> None:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.write(self.render(output_format))
        logging.info(f"Convergence table written to {out}")


def mesh_sequence(study: StudyConfig) -> List[Mesh]:
    """build(n0) refined levels-1 times; level j has n0 * 2^j squares per side."""
    meshes = [build_structured_mesh(study.initial_divisions, study.mesh)]
    for _ in range(study.levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def run_level(mesh: Mesh, config: HDGConfig, problem: ManufacturedProblem, extended: bool = False) -> Dict[str, float]:
    solution = solve_hdg(mesh, config, problem)
    flux = postprocess_flux(mesh, solution)
    errors = compute_errors(mesh, problem, solution, flux)
    if extended:
        errors["err_triple"] = triple_norm(error_triple(mesh, problem, solution), mesh, problem)
        errors["bound"] = bound_terms(mesh, problem, config.k)["total"]
    return errors


def _with_orders(k: int, h_inv: int, errors: Dict[str, float], previous: Optional[ConvergenceRow]) -> ConvergenceRow:
    values = dict(errors)
    for name in ORDERED_ERRORS:
        key = f"err_{name}"
        if key in errors:
            before = getattr(previous, key) if previous is not None else None
            values[f"ord_{name}"] = observed_order(before, errors[key])
    return ConvergenceRow(k=k, h_inv=h_inv, **values)


def run_convergence_study(study: StudyConfig) -> ConvergenceTable:
    problem = get_problem(study.problem.value)
    meshes = mesh_sequence(study)

    rows = []
    for k in study.degrees:
        config = HDGConfig(k=k, solver=study.solver)
        previous = None
        for level, mesh in enumerate(meshes):
            h_inv = study.initial_divisions * 2**level
            errors = run_level(mesh, config, problem, study.extended)
            row = _with_orders(k, h_inv, errors, previous)
            logging.info(
                f"k={k} h^-1={h_inv}: |u-u_h|={row.err_u:.3e} |sigma-sigma_h|={row.err_sigma:.3e} "
                f"|sigma-sigma*|={row.err_sigma_star:.3e} |div|={row.err_div:.3e}"
            )
            rows.append(row)
            previous = row

    return ConvergenceTable(rows, extended=study.extended)
