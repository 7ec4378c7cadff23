#!/usr/bin/env python3
"""
Curvature tests: closed form against the Lipschitz LP and the alpha-lazy
transport oracle, girth gating, and the analytic Jacobian.
"""

import numpy as np
import pytest

from Curvature import (
    CurvatureException,
    CurvatureMethod,
    CurvatureVector,
    GirthError,
    curvature_alpha_oracle,
    curvature_closed_form,
    curvature_jacobian,
    curvature_lp,
    curvature_vector,
    jacobian_diagonal_formula,
    node_curvature,
    resolve_method,
)
from Graph import WeightVector
from GraphLibrary import build, path_graph


@pytest.mark.parametrize(
    "name, expected",
    [
        ("k2", 2.0),
        ("p3", 1.0),
        ("star_1_3", 2.0 / 3.0),
        ("c6", 0.0),
        ("gp_8_3", -2.0 / 3.0),
        ("heawood", -2.0 / 3.0),
    ],
)
def test_unit_weight_curvature_is_uniform(name, expected):
    graph = build(name)
    kappa = curvature_vector(graph, WeightVector.ones(graph))
    assert kappa.method == CurvatureMethod.CLOSED_FORM
    assert len(kappa) == graph.edge_count
    assert kappa.values == pytest.approx(np.full(graph.edge_count, expected))


def test_dumbbell_unit_weight_classes(d66):
    kappa = curvature_vector(d66, WeightVector.ones(d66))
    assert kappa[d66.edge_index(0, 6)] == pytest.approx(-2.0 / 3.0)
    assert kappa[d66.edge_index(0, 1)] == pytest.approx(-1.0 / 3.0)
    assert kappa[d66.edge_index(2, 3)] == pytest.approx(0.0)


def test_weighted_path_closed_form():
    graph = path_graph(3)
    weights = WeightVector(np.array([1.0, 2.0]))
    assert curvature_closed_form(graph, weights, 0) == pytest.approx(2.0 / 3.0)
    assert curvature_closed_form(graph, weights, 1) == pytest.approx(4.0 / 3.0)


@pytest.mark.parametrize("name", ["p3", "star_1_3", "c6", "d6_6", "tadpole_6_1", "gp83_asym"])
def test_closed_form_matches_lp_on_random_weights(name, rng):
    graph = build(name)
    weights = WeightVector.random(graph, rng)
    closed = curvature_vector(graph, weights, CurvatureMethod.CLOSED_FORM)
    lp = curvature_vector(graph, weights, CurvatureMethod.LIPSCHITZ_LP)
    assert lp.method == CurvatureMethod.LIPSCHITZ_LP
    assert np.max(np.abs(closed.values - lp.values)) <= 1e-8


def test_all_pairs_lp_agrees_with_edge_lp(d66, rng):
    weights = WeightVector.random(d66, rng)
    for i in (0, 3, 12):
        assert curvature_lp(d66, weights, i, all_pairs=True) == pytest.approx(curvature_lp(d66, weights, i), abs=1e-9)


@pytest.mark.parametrize("name", ["d6_6", "gp_8_3"])
def test_alpha_oracle_matches_closed_form_at_unit_weights(name):
    graph = build(name)
    weights = WeightVector.ones(graph)
    closed = curvature_vector(graph, weights)
    oracle = curvature_vector(graph, weights, CurvatureMethod.ALPHA_ORACLE)
    assert oracle.method == CurvatureMethod.ALPHA_ORACLE
    assert oracle.values == pytest.approx(closed.values, abs=1e-6)


@pytest.mark.parametrize("name, expected", [("triangle", 1.5), ("k4", 4.0 / 3.0)])
def test_complete_graphs_use_the_lp(name, expected):
    graph = build(name)
    weights = WeightVector.ones(graph)
    kappa = curvature_vector(graph, weights)
    assert kappa.method == CurvatureMethod.LIPSCHITZ_LP
    assert kappa.values == pytest.approx(np.full(graph.edge_count, expected), abs=1e-9)
    assert curvature_alpha_oracle(graph, weights, 0) == pytest.approx(expected, abs=1e-6)


def test_threaded_evaluation_matches_serial():
    graph = build("k4")
    weights = WeightVector(np.linspace(0.5, 1.5, graph.edge_count))
    serial = curvature_vector(graph, weights)
    threaded = curvature_vector(graph, weights, workers=3)
    assert np.array_equal(serial.values, threaded.values)


def test_closed_form_is_gated_by_girth():
    graph = build("triangle")
    weights = WeightVector.ones(graph)
    with pytest.raises(GirthError) as info:
        curvature_closed_form(graph, weights, 0)
    assert info.value.required == 6
    with pytest.raises(GirthError):
        curvature_vector(graph, weights, CurvatureMethod.CLOSED_FORM)
    with pytest.raises(GirthError):
        curvature_jacobian(graph, weights)


def test_method_resolution():
    assert resolve_method(build("c6"), CurvatureMethod.AUTO) == CurvatureMethod.CLOSED_FORM
    assert resolve_method(build("k4"), CurvatureMethod.AUTO) == CurvatureMethod.LIPSCHITZ_LP
    assert resolve_method(build("c6"), CurvatureMethod.ALPHA_ORACLE) == CurvatureMethod.ALPHA_ORACLE


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5, 1.5])
def test_alpha_outside_open_interval_rejected(alpha):
    graph = build("c6")
    with pytest.raises(ValueError):
        curvature_alpha_oracle(graph, WeightVector.ones(graph), 0, alpha=alpha)


def test_weight_length_mismatch_rejected():
    from Graph import GraphValidationError

    graph = build("c6")
    with pytest.raises(GraphValidationError):
        curvature_vector(graph, WeightVector(np.ones(5)))


@pytest.mark.parametrize("values", [[2.5], [-2.1], [float("nan")]])
def test_curvature_vector_bounds(values):
    with pytest.raises(CurvatureException):
        CurvatureVector(np.array(values), CurvatureMethod.CLOSED_FORM)


def test_total_curvature_is_weight_independent(rng):
    for name in ("d6_6", "gp83_asym", "heawood_hex"):
        graph = build(name)
        kappa = curvature_vector(graph, WeightVector.random(graph, rng))
        assert kappa.total == pytest.approx(2 * (graph.vertex_count - graph.edge_count))


PROPERTY_GRAPHS = ["k2", "p3", "c6", "star_1_3", "d6_6", "gp_8_3"]


def random_weightings(graph, rng, count=50):
    """Log-uniform weights spanning three orders of magnitude."""
    return [WeightVector.from_log(rng.uniform(-3.5, 3.5, size=graph.edge_count)) for _ in range(count)]


@pytest.mark.parametrize("name", PROPERTY_GRAPHS)
def test_curvature_identities_on_random_weights(name, rng):
    graph = build(name)
    for weights in random_weightings(graph, rng):
        kappa = curvature_vector(graph, weights).values
        assert kappa.sum() == pytest.approx(2 * (graph.vertex_count - graph.edge_count), abs=1e-9)
        assert np.all(kappa > -2.0)
        if name == "k2":
            assert kappa == pytest.approx([2.0], abs=1e-12)
        else:
            assert np.all(kappa < 2.0)
        for factor in (0.1, 3.0, 100.0):
            scaled = curvature_vector(graph, weights.scaled(factor)).values
            assert np.max(np.abs(scaled - kappa)) <= 1e-9


@pytest.mark.parametrize("name", ["star_1_3", "c6", "d6_6", "gp_8_3"])
def test_curvature_is_lipschitz_on_bounded_weights(name, rng):
    graph = build(name)
    delta = 2.0
    # Partial derivatives of kappa_e sum to at most 2 delta (d(x) + d(y)) in absolute value
    bound = 4.0 * delta * graph.degrees.max()
    for _ in range(50):
        first = WeightVector(rng.uniform(1.0 / delta, delta, size=graph.edge_count))
        second = WeightVector(rng.uniform(1.0 / delta, delta, size=graph.edge_count))
        change = np.max(np.abs(curvature_vector(graph, first).values - curvature_vector(graph, second).values))
        assert change <= bound * np.max(np.abs(first.values - second.values))


def test_node_curvature_on_star():
    graph = build("star_1_3")
    kappa = curvature_vector(graph, WeightVector.ones(graph))
    assert node_curvature(graph, kappa) == pytest.approx([2.0 / 3.0] * 4)


# ----------------------------------------------------------------------
# Jacobian
# ----------------------------------------------------------------------

def test_jacobian_structure(d66, rng):
    weights = WeightVector.random(d66, rng)
    jacobian = curvature_jacobian(d66, weights)
    assert len(jacobian) == d66.edge_count
    assert jacobian.is_symmetric
    assert jacobian.min_eigenvalue() >= -1e-12
    # Uniform rescaling leaves curvature unchanged
    assert jacobian.matrix @ np.ones(d66.edge_count) == pytest.approx(np.zeros(d66.edge_count), abs=1e-12)
    assert jacobian.rank() == d66.edge_count - 1
    assert np.diag(jacobian.matrix) == pytest.approx(jacobian_diagonal_formula(d66, weights))


@pytest.mark.parametrize("name", ["d6_6", "gp_8_3"])
def test_jacobian_matches_finite_differences(name, rng):
    graph = build(name)
    n = graph.edge_count
    h = 1e-6
    for _ in range(10):
        weights = WeightVector.random(graph, rng)
        jacobian = curvature_jacobian(graph, weights)
        r = weights.log()
        numeric = np.empty((n, n))
        for j in range(n):
            step = np.zeros(n)
            step[j] = h
            plus = curvature_vector(graph, WeightVector.from_log(r + step)).values
            minus = curvature_vector(graph, WeightVector.from_log(r - step)).values
            numeric[:, j] = (plus - minus) / (2 * h)
        assert np.max(np.abs(numeric - jacobian.matrix)) <= 1e-5
        assert jacobian.is_symmetric
        assert jacobian.min_eigenvalue() >= -1e-12
        assert jacobian.rank() == n - 1
        assert jacobian.matrix @ np.ones(n) == pytest.approx(np.zeros(n), abs=1e-12)


def test_method_descriptions():
    for method in CurvatureMethod:
        assert method.desc
