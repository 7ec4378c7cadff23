#!/usr/bin/env python3
"""
Tests for the trajectory CSV, the SVG plot and the JSON report.
"""

import csv
import io
import json
import logging

import numpy as np
import pytest

from Graph import WeightVector
from GraphLibrary import build, edge_classes
from ReportWriter import (
    plot_trajectory,
    render_report,
    trajectory_header,
    write_report,
    write_trajectory_csv,
)
from RicciFlow import IntegratorOptions, PrescribedCurvature, integrate


@pytest.fixture
def p4_trajectory():
    graph = build("p4")
    start = WeightVector(np.array([1.0, 1.0, 1.0]))
    return integrate(graph, start, PrescribedCurvature.average(graph), IntegratorOptions.from_config(t_max=1.0))


def test_header_layout():
    assert trajectory_header(2) == ["t", "omega_0", "omega_1", "kappa_0", "kappa_1", "lyapunov"]


def read_columns(handle):
    rows = list(csv.reader(handle))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, j] for j, name in enumerate(header)}


def test_csv_columns_match_samples(p4_trajectory, tmp_path, debug_logs):
    path = tmp_path / "p4.csv"
    write_trajectory_csv(p4_trajectory, path)
    with open(path, newline="") as handle:
        columns = read_columns(handle)
    assert list(columns) == trajectory_header(3)
    assert columns["t"] == pytest.approx(p4_trajectory.times)
    assert columns["omega_1"] == pytest.approx(p4_trajectory.weight_matrix()[:, 1])
    assert columns["kappa_0"] == pytest.approx(p4_trajectory.curvature_matrix()[:, 0])
    assert columns["lyapunov"] == pytest.approx(p4_trajectory.lyapunov_series())
    assert any("Trajectory saved" in record.message for record in debug_logs.records if record.levelno == logging.INFO)


def test_csv_to_stream_is_exact(p4_trajectory):
    first, second = io.StringIO(), io.StringIO()
    write_trajectory_csv(p4_trajectory, first)
    write_trajectory_csv(p4_trajectory, second)
    assert first.getvalue() == second.getvalue()
    # repr round-trips floats exactly
    columns = read_columns(io.StringIO(first.getvalue()))
    assert np.array_equal(columns["omega_0"], p4_trajectory.weight_matrix()[:, 0])


def test_plot_is_written_and_reproducible(d66, tmp_path):
    traj = integrate(d66, WeightVector.ones(d66), PrescribedCurvature.average(d66), IntegratorOptions.from_config(t_max=1.0))
    classes = edge_classes("d6_6", d66)
    paths = [tmp_path / "a.svg", tmp_path / "b.svg"]
    for path in paths:
        plot_trajectory(traj, path, kappa_bar=-2.0 / 13.0, edge_classes=classes, title="d6_6")
    text = paths[0].read_text()
    assert "<svg" in text
    assert "bridge" in text
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_plot_without_classes(p4_trajectory, tmp_path):
    path = tmp_path / "p4.svg"
    plot_trajectory(p4_trajectory, path)
    assert path.stat().st_size > 0


def test_report_replaces_non_finite_values():
    text = render_report({"girth": float("inf"), "gap": float("-inf"), "rows": [np.float64(0.5), np.int64(3)], "values": np.arange(2)})
    report = json.loads(text)
    assert report == {"girth": "inf", "gap": "-inf", "rows": [0.5, 3], "values": [0, 1]}
    assert text.endswith("\n")


def test_report_to_stdout_and_file(tmp_path, capsys):
    write_report({"graph": "c6"})
    assert json.loads(capsys.readouterr().out) == {"graph": "c6"}
    path = tmp_path / "report.json"
    write_report({"graph": "c6"}, path)
    assert capsys.readouterr().out == ""
    assert json.loads(path.read_text()) == {"graph": "c6"}
