import argparse
import logging
import sys
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from functions.harness.checks import run_checks
from functions.harness.convergence import run_convergence_study
from model.pydantic_models import MeshPattern, OutputFormat, ProblemName, SolverMethod, StudyConfig
from utils import get_log_level, load_config_file

logging.basicConfig(
    stream=sys.stdout,
    level=get_log_level(),
    format="%(asctime)s %(levelname)s %(message)s",
)

EXIT_OK = 0
EXIT_INVARIANT_FAILURE = 1
EXIT_BAD_INPUT = 2


def parse_arguments(argv: Optional[List[str]] = None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(prog="hdg", description="HDG solver and convergence-study harness")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a convergence study and emit the error table")
    run.add_argument("--k", type=int, nargs="+", help="Flux/trace degrees (potential degree is k+1)")
    run.add_argument("--levels", type=int, help="Number of meshes, h^-1 = 2, 4, 8, ...")
    run.add_argument("--problem", choices=[p.value for p in ProblemName], help="Manufactured problem")
    run.add_argument("--out", help="Output file; the table is printed when omitted")
    run.add_argument("--format", choices=[f.value for f in OutputFormat], help="Table format")
    run.add_argument("--mesh", choices=[m.value for m in MeshPattern], help="Initial mesh pattern")
    run.add_argument("--solver", choices=[s.value for s in SolverMethod], help="Condensed system solver")
    run.add_argument(
        "--extended",
        action="store_true",
        default=None,
        help="Add the triple norm of the error and the data bound",
    )
    run.add_argument("--config", help="key=value file; flags win over its values")

    check = subparsers.add_parser("check", help="Run the invariant suite")
    check.add_argument("--k", type=int, default=0, help="Flux/trace degree")

    return parser.parse_args(argv)


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "t"):
        return True
    if lowered in ("false", "0", "no", "f"):
        return False
    raise ValueError(f"Expected a boolean, got '{value}'")


def merge_settings(args) -> Dict:
    """Config file values overridden by the flags that were given."""
    settings: Dict = {}
    if args.config:
        raw = load_config_file(args.config)
        if "k" in raw:
            settings["k"] = [int(part) for part in raw["k"].split(",") if part.strip()]
        if "levels" in raw:
            settings["levels"] = int(raw["levels"])
        if "extended" in raw:
            settings["extended"] = _parse_bool(raw["extended"])
        for key in ("problem", "out", "format", "mesh", "solver"):
            if key in raw:
                settings[key] = raw[key]

    for key in ("k", "levels", "problem", "out", "format", "mesh", "solver", "extended"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return settings


def run_command(args) -> int:
    settings = merge_settings(args)
    study = StudyConfig(
        degrees=settings.get("k", [0]),
        levels=settings.get("levels", 5),
        problem=settings.get("problem", ProblemName.PAPER.value),
        mesh=settings.get("mesh", MeshPattern.CRISSCROSS.value),
        solver=settings.get("solver", SolverMethod.DIRECT.value),
        extended=settings.get("extended", False),
    )
    output_format = OutputFormat(settings.get("format", OutputFormat.CSV.value))

    logging.info(f"Convergence study: {study.model_dump_json()}")
    table = run_convergence_study(study)
    if settings.get("out"):
        table.write(settings["out"], output_format)
    else:
        print(table.render(output_format), end="")
    return EXIT_OK


def check_command(args) -> int:
    results = run_checks(args.k)
    failed = [r for r in results if not r.passed]
    if failed:
        logging.error(f"{len(failed)} of {len(results)} checks failed: {', '.join(r.name for r in failed)}")
        return EXIT_INVARIANT_FAILURE
    logging.info(f"All {len(results)} checks passed for k={args.k}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    try:
        if args.command == "run":
            return run_command(args)
        return check_command(args)
    except (RuntimeError, np.linalg.LinAlgError) as e:
        # LinAlgError derives from ValueError, so it is caught first
        logging.error(f"Numerical failure: {str(e)}")
        return EXIT_INVARIANT_FAILURE
    except (ValidationError, ValueError) as e:
        logging.error(f"Bad input: {str(e)}")
        return EXIT_BAD_INPUT


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
