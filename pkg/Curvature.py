"""
Curvature - Lin-Lu-Yau edge curvature on weighted graphs.

Three evaluation routes share one entry point (curvature_vector):
  closed_form   exact formula, valid when girth >= 6
  lipschitz_lp  limit-free LP over 1-Lipschitz functions, any graph
  alpha_oracle  lazy-walk Wasserstein curvature at a fixed idleness alpha

Distances are hop counts throughout; weights only enter through the
random-walk measures.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ConfigLoader import config
from Graph import Graph, WeightVector
from LinearProgram import LinearProgram, NumericalFailure, Relation, solve, transport_problem

logger = logging.getLogger(__name__)

# Rounding slack on the [-2, 2] bound check
BOUND_SLACK = 1e-9


class CurvatureException(Exception):
    pass


class GirthError(CurvatureException):
    """Closed form or Jacobian requested on a graph with a short cycle."""

    def __init__(self, girth: float, required: int):
        self.girth = girth
        self.required = required
        super().__init__(f"Operation requires girth >= {required}, graph has girth {girth}.")


class CurvatureMethod(Enum):
    CLOSED_FORM = "closed_form"
    LIPSCHITZ_LP = "lipschitz_lp"
    ALPHA_ORACLE = "alpha_oracle"
    AUTO = "auto"

    @property
    def desc(self):
        return {
            CurvatureMethod.CLOSED_FORM: "Exact formula for girth >= 6",
            CurvatureMethod.LIPSCHITZ_LP: "Infimum of the Laplacian gradient over 1-Lipschitz functions",
            CurvatureMethod.ALPHA_ORACLE: "Lazy random walk transport at fixed idleness",
            CurvatureMethod.AUTO: "Closed form when girth allows, LP otherwise",
        }[self]


@dataclass(frozen=True, eq=False)
class CurvatureVector:
    """Edge-indexed curvatures tagged with the method that produced them."""

    values: np.ndarray
    method: CurvatureMethod

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(array)):
            raise CurvatureException("Curvature vector contains non-finite entries.")
        if np.any(array < -2.0 - BOUND_SLACK) or np.any(array > 2.0 + BOUND_SLACK):
            raise CurvatureException(
                f"Curvature outside [-2, 2]: min {array.min():.6g}, max {array.max():.6g}."
            )
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class CurvatureJacobian:
    """J[i, j] = d kappa_i / d r_j with r = ln(omega)."""

    matrix: np.ndarray

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.T, atol=1e-12))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > tol))


def _require_girth(graph: Graph) -> None:
    required = config.get_closed_form_min_girth()
    if graph.girth < required:
        raise GirthError(graph.girth, required)


# ----------------------------------------------------------------------
# Closed form
# ----------------------------------------------------------------------

def _closed_form_values(graph: Graph, weights: WeightVector) -> np.ndarray:
    masses = weights.masses(graph)
    u = np.array([edge[0] for edge in graph.edges])
    v = np.array([edge[1] for edge in graph.edges])
    return 2.0 * weights.values * (1.0 / masses[u] + 1.0 / masses[v]) - 2.0


def curvature_closed_form(graph: Graph, weights: WeightVector, i: int) -> float:
    """kappa_e = 2 w_e (1/m(x) + 1/m(y)) - 2 for e = (x, y)."""
    _require_girth(graph)
    x, y = graph.edges[i]
    masses = weights.masses(graph)
    return 2.0 * weights[i] * (1.0 / masses[x] + 1.0 / masses[y]) - 2.0


# ----------------------------------------------------------------------
# Limit-free Lipschitz LP
# ----------------------------------------------------------------------

def edge_program(graph: Graph, weights: WeightVector, i: int, all_pairs: bool = False) -> LinearProgram:
    """
    LP over f: V -> R with f(x) = 0, f(y) = 1, |f(u) - f(v)| <= 1 on edges
    (or <= d(u, v) on all pairs), minimizing Laplacian(f)(x) - Laplacian(f)(y).
    """
    x, y = graph.edges[i]
    masses = weights.masses(graph)
    n = graph.vertex_count

    objective = np.zeros(n)
    for z, index in graph.adjacency[x]:
        objective[z] += weights[index] / masses[x]
    objective[x] -= 1.0
    for z, index in graph.adjacency[y]:
        objective[z] -= weights[index] / masses[y]
    objective[y] += 1.0

    lp = LinearProgram(objective=objective)
    distances = graph.distance_matrix
    for z in range(n):
        lp.set_bounds(z, -float(distances[x, z]), None)
    lp.set_bounds(x, 0.0, 0.0)

    if all_pairs:
        pairs = [(u, v, float(distances[u, v])) for u in range(n) for v in range(u + 1, n)]
    else:
        pairs = [(u, v, 1.0) for u, v in graph.edges]
    for u, v, limit in pairs:
        row = np.zeros(n)
        row[u], row[v] = 1.0, -1.0
        lp.add_constraint(row, Relation.LE, limit)
        lp.add_constraint(-row, Relation.LE, limit)

    gradient = np.zeros(n)
    gradient[y], gradient[x] = 1.0, -1.0
    lp.add_constraint(gradient, Relation.EQ, 1.0)
    return lp


def curvature_lp(graph: Graph, weights: WeightVector, i: int, all_pairs: bool = False) -> float:
    weights.check_against(graph)
    solution = solve(edge_program(graph, weights, i, all_pairs=all_pairs))
    if not solution.is_optimal:
        # The program is always feasible and bounded
        raise NumericalFailure(f"Curvature LP for edge {graph.edge_label(i)} returned {solution.status.value}.")
    return solution.value


# ----------------------------------------------------------------------
# Alpha-lazy transport oracle
# ----------------------------------------------------------------------

def lazy_measure(graph: Graph, weights: WeightVector, x: int, alpha: float):
    """Support and masses of m_x^alpha: alpha at x, (1 - alpha) w_xz / m(x) at z ~ x."""
    mass_x = sum(weights[index] for _, index in graph.adjacency[x])
    support = [x] + [z for z, _ in graph.adjacency[x]]
    masses = [alpha] + [(1.0 - alpha) * weights[index] / mass_x for _, index in graph.adjacency[x]]
    return support, np.array(masses)


def wasserstein_distance(graph: Graph, source_support, source_mass, target_support, target_mass) -> float:
    cost = graph.distance_matrix[np.ix_(source_support, target_support)].astype(float)
    solution = solve(transport_problem(source_mass, target_mass, cost))
    if not solution.is_optimal:
        raise NumericalFailure(f"Transport LP returned {solution.status.value}.")
    return solution.value


def curvature_alpha_oracle(graph: Graph, weights: WeightVector, i: int, alpha: Optional[float] = None) -> float:
    """(1 - W(m_x^alpha, m_y^alpha) / d(x, y)) / (1 - alpha) for e_i = (x, y)."""
    alpha = config.get_default_alpha() if alpha is None else alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    weights.check_against(graph)
    x, y = graph.edges[i]
    support_x, mass_x = lazy_measure(graph, weights, x, alpha)
    support_y, mass_y = lazy_measure(graph, weights, y, alpha)
    distance = wasserstein_distance(graph, support_x, mass_x, support_y, mass_y)
    return (1.0 - distance / graph.distance_matrix[x, y]) / (1.0 - alpha)


# ----------------------------------------------------------------------
# Aggregation
# ----------------------------------------------------------------------

def resolve_method(graph: Graph, method: CurvatureMethod) -> CurvatureMethod:
    if method != CurvatureMethod.AUTO:
        return method
    if graph.girth >= config.get_closed_form_min_girth():
        return CurvatureMethod.CLOSED_FORM
    return CurvatureMethod.LIPSCHITZ_LP


def curvature_vector(
    graph: Graph,
    weights: WeightVector,
    method: CurvatureMethod = CurvatureMethod.AUTO,
    alpha: Optional[float] = None,
    workers: int = 1,
) -> CurvatureVector:
    """All edge curvatures by one method; per-edge LPs may run on a thread pool."""
    weights.check_against(graph)
    method = resolve_method(graph, method)

    if method == CurvatureMethod.CLOSED_FORM:
        _require_girth(graph)
        return CurvatureVector(_closed_form_values(graph, weights), method)

    if method == CurvatureMethod.LIPSCHITZ_LP:
        def evaluate(i: int) -> float:
            return curvature_lp(graph, weights, i)
    else:
        def evaluate(i: int) -> float:
            return curvature_alpha_oracle(graph, weights, i, alpha)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluate, range(graph.edge_count)))
    else:
        values = [evaluate(i) for i in range(graph.edge_count)]
    return CurvatureVector(np.array(values), method)


def node_curvature(graph: Graph, kappa: CurvatureVector) -> np.ndarray:
    """Mean curvature of the edges incident to each vertex."""
    return (graph.incidence @ kappa.values) / graph.degrees


# ----------------------------------------------------------------------
# Jacobian (girth >= 6)
# ----------------------------------------------------------------------

def curvature_jacobian(graph: Graph, weights: WeightVector) -> CurvatureJacobian:
    """
    Off-diagonal -2 w_i w_j / m(s)^2 where s is the endpoint shared by e_i and
    e_j; the diagonal is the negated off-diagonal row sum.
    """
    _require_girth(graph)
    masses = weights.masses(graph)
    w = weights.values
    n = graph.edge_count
    matrix = np.zeros((n, n))
    for s in range(graph.vertex_count):
        incident = [index for _, index in graph.adjacency[s]]
        for a in incident:
            for b in incident:
                if a != b:
                    matrix[a, b] = -2.0 * w[a] * w[b] / masses[s] ** 2
    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    return CurvatureJacobian(matrix)


def jacobian_diagonal_formula(graph: Graph, weights: WeightVector) -> np.ndarray:
    """
    Direct evaluation of d kappa_i / d r_i:
    2 w_i [(m(x) - w_i) / m(x)^2 + (m(y) - w_i) / m(y)^2].
    """
    _require_girth(graph)
    masses = weights.masses(graph)
    w = weights.values
    u = np.array([edge[0] for edge in graph.edges])
    v = np.array([edge[1] for edge in graph.edges])
    return 2.0 * w * ((masses[u] - w) / masses[u] ** 2 + (masses[v] - w) / masses[v] ** 2)
