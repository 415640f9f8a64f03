import numpy as np
import pytest

from functions.harness.convergence import BASE_COLUMNS, ConvergenceTable
from main import EXIT_BAD_INPUT, EXIT_INVARIANT_FAILURE, EXIT_OK, main, merge_settings, parse_arguments
from model.pydantic_models import CheckResult, MeshPattern


def test_run_writes_table(tmp_path):
    out = tmp_path / "table.csv"
    code = main(["run", "--k", "0", "1", "--levels", "2", "--problem", "linear", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(BASE_COLUMNS)
    assert len(lines) == 1 + 4


def test_run_prints_table(capsys):
    assert main(["run", "--k", "0", "--levels", "1", "--problem", "linear"]) == EXIT_OK
    assert ",".join(BASE_COLUMNS) in capsys.readouterr().out


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "study.conf"
    config.write_text("k=1\nlevels=3\nproblem=linear\nformat=md\nextended=true\n")
    out = tmp_path / "table.csv"
    code = main(["run", "--config", str(config), "--levels", "2", "--format", "csv", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2
    assert lines[0].endswith("err_triple,ord_triple,bound")
    assert lines[1].startswith("1,2,")


def test_merge_settings_without_config():
    settings = merge_settings(parse_arguments(["run", "--k", "2", "--solver", "cg"]))
    assert settings == {"k": [2], "solver": "cg"}


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--k", "5", "--levels", "1"],
        ["run", "--levels", "0"],
        ["check", "--k", "-1"],
    ],
)
def test_out_of_range_input(argv):
    assert main(argv) == EXIT_BAD_INPUT


def test_bad_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.conf")]) == EXIT_BAD_INPUT
    config = tmp_path / "bad.conf"
    config.write_text("extended=maybe\n")
    assert main(["run", "--config", str(config)]) == EXIT_BAD_INPUT
    config.write_text("mesh=hexagonal\n")
    assert main(["run", "--config", str(config)]) == EXIT_BAD_INPUT


def test_unknown_choice_is_rejected_by_parser():
    with pytest.raises(SystemExit) as exit_info:
        main(["run", "--problem", "poisson"])
    assert exit_info.value.code == 2


def test_check_passes():
    assert main(["check", "--k", "0"]) == EXIT_OK


def test_failed_check_gives_invariant_exit_code(monkeypatch):
    monkeypatch.setattr("main.run_checks", lambda k: [CheckResult(name="mesh", passed=False, detail="broken")])
    assert main(["check", "--k", "1"]) == EXIT_INVARIANT_FAILURE


@pytest.mark.parametrize("error", [RuntimeError("solve failed"), np.linalg.LinAlgError("singular block")])
def test_numerical_failure_gives_invariant_exit_code(monkeypatch, error):
    def failing_study(study):
        raise error

    monkeypatch.setattr("main.run_convergence_study", failing_study)
    assert main(["run", "--k", "0", "--levels", "1"]) == EXIT_INVARIANT_FAILURE


@pytest.mark.parametrize("flags, expected", [([], MeshPattern.CRISSCROSS), (["--mesh", "diagonal"], MeshPattern.DIAGONAL)])
def test_run_mesh_pattern(monkeypatch, flags, expected):
    studies = []
    monkeypatch.setattr("main.run_convergence_study", lambda study: studies.append(study) or ConvergenceTable([]))
    assert main(["run", "--k", "0", "--levels", "1", *flags]) == EXIT_OK
    assert studies[0].mesh == expected
