#!/usr/bin/env python3
"""
Command-line tests: every subcommand end to end, exit codes and the
determinism of the written artifacts.
"""

import csv
import json

import numpy as np
import pytest

from ConfigLoader import CONFIG_ENV_VAR, config
from Graph import WeightVector
from GraphLibrary import build
from RicciFlow import PrescribedCurvature, StepFailure, integrate, IntegratorOptions
from Uniformization import DivergenceError
from ricci_uniform import ExitCode, RunConfig, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


# ----------------------------------------------------------------------
# info
# ----------------------------------------------------------------------

def test_info_dumbbell(capsys):
    code, report = run_cli(capsys, "info", "--builtin", "d6_6")
    assert code == 0
    assert (report["vertices"], report["edges"], report["girth"]) == (12, 13, 6)
    assert report["average_curvature_exact"] == "-2/13"
    assert report["classification"] == "neither"
    assert report["density_condition"]["satisfied"] is True
    assert report["exit_code"] == 0


def test_info_tadpole_prints_witness(capsys):
    code, report = run_cli(capsys, "info", "--builtin", "tadpole_6_1")
    assert code == 0
    condition = report["density_condition"]
    assert condition["satisfied"] is False
    assert condition["witness"]["vertices"] == ["0", "1", "2", "3", "4", "5"]


def test_info_regular_petersen(capsys):
    _, report = run_cli(capsys, "info", "--builtin", "gp_8_3")
    assert report["classification"] == "regular(3)"
    assert report["average_curvature_exact"] == "-2/3"


def test_info_short_girth_and_tree(capsys):
    _, report = run_cli(capsys, "info", "--builtin", "triangle")
    assert report["girth"] == 3
    assert report["average_curvature"] is None
    _, report = run_cli(capsys, "info", "--builtin", "k2")
    assert report["girth"] == "inf"
    assert report["average_curvature"] == pytest.approx(2.0)


def test_info_from_edge_list_file(tmp_path, capsys):
    path = tmp_path / "hexagon.txt"
    path.write_text("# labelled hexagon\n" + "".join(f"v{i} v{(i + 1) % 6} 1.5\n" for i in range(6)))
    code, report = run_cli(capsys, "info", "--graph", str(path))
    assert code == 0
    assert report["graph"] == "hexagon"
    assert report["classification"] == "regular(2)"


# ----------------------------------------------------------------------
# curvature
# ----------------------------------------------------------------------

def test_curvature_table_with_verification(capsys):
    code, report = run_cli(capsys, "curvature", "--builtin", "gp_8_3", "--verify")
    assert code == 0
    rows = report["edges_table"]
    assert len(rows) == 24
    assert all(row["kappa"] == pytest.approx(-2.0 / 3.0) for row in rows)
    assert all(row["method"] == "closed_form" for row in rows)
    assert report["verify"]["reference"] == "lipschitz_lp"
    assert report["verify"]["max_delta"] <= 1e-8
    assert report["total_curvature"] == pytest.approx(-16.0)


def test_curvature_on_triangle_uses_lp(capsys):
    code, report = run_cli(capsys, "curvature", "--builtin", "triangle", "--verify")
    assert code == 0
    assert {row["method"] for row in report["edges_table"]} == {"lipschitz_lp"}
    assert report["verify"]["reference"] == "alpha_oracle"
    assert report["verify"]["max_delta"] <= 1e-6


def test_curvature_with_file_weights(tmp_path, capsys):
    path = tmp_path / "path.json"
    path.write_text(json.dumps({"vertices": ["a", "b", "c"], "edges": [{"u": "a", "v": "b", "w": 1}, {"u": "b", "v": "c", "w": 2}]}))
    _, report = run_cli(capsys, "curvature", "--graph", str(path))
    kappas = [row["kappa"] for row in report["edges_table"]]
    assert kappas == pytest.approx([2.0 / 3.0, 4.0 / 3.0])
    assert report["edges_table"][1]["u"] == "b"


# ----------------------------------------------------------------------
# flow
# ----------------------------------------------------------------------

def test_flow_dumbbell_stratifies_bridge(tmp_path, capsys):
    csv_path = tmp_path / "d66.csv"
    svg_path = tmp_path / "d66.svg"
    code, report = run_cli(
        capsys, "flow", "--builtin", "d6_6", "--target", "average", "--t-max", "30",
        "--stratify", "2.0", "--csv", str(csv_path), "--plot", str(svg_path),
    )
    assert code == 0
    assert report["stratify"]["edges"] == [12]
    assert report["stratify"]["labels"] == ["0-6"]
    assert report["convergence"]["residual"] <= 1e-3
    assert report["edge_classes"]["bridge"]["min"] > 2.5

    with open(csv_path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0][0] == "t" and rows[0][-1] == "lyapunov"
    assert len(rows[0]) == 1 + 2 * 13 + 1
    assert float(rows[-1][0]) == pytest.approx(report["trajectory"]["t_final"])
    assert len(rows) - 1 == report["trajectory"]["samples"]

    svg = svg_path.read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_flow_asymmetric_petersen_class_report(capsys):
    code, report = run_cli(capsys, "flow", "--builtin", "gp83_asym", "--target", "average", "--t-max", "30")
    assert code == 0
    classes = report["edge_classes"]
    assert set(classes) == {"subdivision", "orange", "purple", "blue"}
    assert classes["subdivision"]["below_decay"] == 2
    assert classes["orange"]["below_decay"] == 4
    assert len(classes["blue"]["edges"]) == 18
    assert classes["blue"]["above_growth"] >= 9
    purple = report["monotonicity"]["purple"]
    assert isinstance(purple["rose_then_fell"], bool)


def test_flow_random_start_on_regular_graph_with_defaults(capsys):
    code, report = run_cli(capsys, "flow", "--builtin", "gp_8_3", "--random-init", "--seed", "7", "--target", "average")
    assert code == 0
    assert report["convergence"]["rate"] < 0
    normalized = np.array(report["final"]["normalized_weights"])
    assert np.ptp(normalized) <= 1e-5


@pytest.mark.slow
def test_flow_random_start_on_regular_graph_long_horizon(capsys):
    code, report = run_cli(
        capsys, "flow", "--builtin", "gp_8_3", "--random-init", "--seed", "7", "--target", "average",
        "--dt", "0.05", "--t-max", "300",
    )
    assert code == 0
    assert report["convergence"]["converged"] is True
    normalized = np.array(report["final"]["normalized_weights"])
    assert np.ptp(normalized) * len(normalized) <= 1e-5


def test_flow_outputs_are_deterministic(tmp_path, capsys):
    outputs = []
    for run in range(2):
        prefix = tmp_path / f"run{run}"
        code = main([
            "flow", "--builtin", "gp_8_3", "--random-init", "--seed", "3", "--t-max", "2",
            "--csv", f"{prefix}.csv", "--plot", f"{prefix}.svg", "--report", f"{prefix}.json",
        ])
        assert code == 0
        outputs.append([(tmp_path / f"run{run}.{ext}").read_bytes() for ext in ("csv", "svg", "json")])
    assert capsys.readouterr().out == ""
    assert outputs[0] == outputs[1]


def test_flow_with_target_file(tmp_path, capsys):
    target = tmp_path / "target.txt"
    target.write_text("".join(f"{i} 0.0\n" for i in range(6)))
    code, report = run_cli(capsys, "flow", "--builtin", "c6", "--target", str(target), "--t-max", "1")
    assert code == 0
    assert report["target"]["kind"] == "custom"
    assert report["convergence"]["converged"] is True


def test_flow_zero_target_on_dumbbell_still_runs(capsys):
    code, report = run_cli(capsys, "flow", "--builtin", "d6_6", "--target", "zero", "--t-max", "1")
    assert code == 0
    assert report["convergence"]["converged"] is False


def test_flow_step_failure_exits_two(mocker, capsys):
    graph = build("p3")
    partial = integrate(graph, WeightVector(np.array([1.0, 2.0])), PrescribedCurvature.average(graph),
                        IntegratorOptions.from_config(t_max=0.1))
    mocker.patch("ricci_uniform.integrate", side_effect=StepFailure("Integration failed at t=0.1", partial))
    code, report = run_cli(capsys, "flow", "--builtin", "p3")
    assert code == ExitCode.NUMERICAL_FAILURE.value
    assert report["exit_code"] == 2
    assert "convergence" in report


# ----------------------------------------------------------------------
# uniformize
# ----------------------------------------------------------------------

def test_uniformize_dumbbell(capsys):
    code, report = run_cli(capsys, "uniformize", "--builtin", "d6_6")
    assert code == 0
    assert report["density_condition"]["satisfied"] is True
    assert report["solution"]["curvature"] == pytest.approx([-2.0 / 13.0] * 13, abs=1e-8)
    assert sum(report["solution"]["normalized_weights"]) == pytest.approx(1.0)


def test_uniformize_cycle_has_equal_weights(capsys):
    _, report = run_cli(capsys, "uniformize", "--builtin", "c6")
    weights = report["solution"]["weights"]
    assert max(weights) - min(weights) <= 1e-12


def test_uniformize_tadpole_skips_solve(mocker, capsys):
    solve = mocker.patch("ricci_uniform.solve_constant_weights")
    code, report = run_cli(capsys, "uniformize", "--builtin", "tadpole_6_1")
    assert code == ExitCode.CONDITION_FAILURE.value == 3
    assert "solution" not in report
    assert report["density_condition"]["witness"]["size"] == 6
    solve.assert_not_called()


def test_uniformize_divergence_exits_two(mocker, capsys):
    mocker.patch("ricci_uniform.solve_constant_weights", side_effect=DivergenceError("no decrease", 3, 1.0))
    code, report = run_cli(capsys, "uniformize", "--builtin", "d6_6")
    assert code == 2
    assert report is None


# ----------------------------------------------------------------------
# Input errors
# ----------------------------------------------------------------------

@pytest.mark.parametrize(
    "argv",
    [
        ["info", "--builtin", "no_such_graph"],
        ["info"],
        ["info", "--builtin", "c6", "--graph", "x.txt"],
        ["explode", "--builtin", "c6"],
        ["flow", "--builtin", "c6", "--dt", "-1"],
        ["flow", "--builtin", "c6", "--sample-every", "0"],
        ["flow", "--builtin", "triangle"],
        ["uniformize", "--builtin", "triangle"],
        ["flow", "--builtin", "c6", "--target", "/nonexistent/target.txt"],
    ],
)
def test_input_errors_exit_one(argv, capsys):
    assert main(argv) == ExitCode.INPUT_ERROR.value
    assert capsys.readouterr().out == ""


def test_malformed_graph_file_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("a b\nb c d e\n")
    assert main(["info", "--graph", str(path)]) == 1
    assert main(["info", "--graph", str(tmp_path / "missing.txt")]) == 1


def test_undecodable_graph_file_exits_one(tmp_path, capsys):
    path = tmp_path / "latin1.txt"
    path.write_bytes("caf\xe9 b\n".encode("latin-1"))
    assert main(["info", "--graph", str(path)]) == ExitCode.INPUT_ERROR.value
    assert capsys.readouterr().out == ""


def test_non_finite_target_file_exits_one(tmp_path, capsys):
    target = tmp_path / "target.txt"
    target.write_text("".join(f"{i} {'nan' if i == 2 else 0.0}\n" for i in range(6)))
    assert main(["flow", "--builtin", "c6", "--target", str(target)]) == ExitCode.INPUT_ERROR.value


def test_out_of_range_configured_option_exits_one(tmp_path, monkeypatch, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"flow": {"max_step_change": -1.0}}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    config.reload()
    assert main(["flow", "--builtin", "c6", "--t-max", "1"]) == ExitCode.INPUT_ERROR.value


def test_internal_value_error_is_not_an_input_error(mocker):
    mocker.patch("ricci_uniform.check_condition", side_effect=ValueError("shape mismatch"))
    with pytest.raises(ValueError, match="shape mismatch"):
        main(["info", "--builtin", "d6_6"])


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(command="info")
    with pytest.raises(ValueError):
        RunConfig(command="flow", builtin="c6", t_max=0.0)
    cfg = RunConfig(command="flow", builtin="c6", dt=0.05)
    assert cfg.name == "c6"
    assert cfg.integrator_options().dt == 0.05


def test_exit_code_descriptions():
    assert ExitCode.CONDITION_FAILURE.desc == "Density condition not satisfied"
