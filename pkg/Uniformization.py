"""
Uniformization - constant-curvature weights on girth >= 6 graphs.

Existence is decided by the density condition

    max over proper non-empty Omega of |E(Omega)| / |Omega|  <  |E| / |V|

in exact rational arithmetic, either by subset enumeration or by a max-flow
reduction. When it holds, the weights come from the unique zero-mean
minimizer g* of a strictly convex vertex functional H, found by damped Newton:

    m(x) = exp(g*(x)),  w(x, y) = (|V|/|E|) m(x) m(y) / (m(x) + m(y))
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import networkx as nx
from networkx.algorithms.flow import preflow_push
import numpy as np

from ConfigLoader import config
from Curvature import CurvatureVector, curvature_vector
from Graph import Graph, VertexSubset, WeightVector
from RicciFlow import (
    ConsistencyError,
    ConvergenceReport,
    FlowTrajectory,
    IntegratorOptions,
    PrescribedCurvature,
    average_curvature,
    convergence_report,
    integrate,
    total_curvature,
)

logger = logging.getLogger(__name__)

# Masks per enumeration chunk
CHUNK_SIZE = 1 << 16

# check_condition switches from enumeration to max flow above this size
ENUMERATION_CUTOFF = 20

SOURCE = "source"
SINK = "sink"


class UniformizationException(Exception):
    pass


class SizeError(UniformizationException):
    """Graph too large for subset enumeration."""
    pass


class DivergenceError(UniformizationException):
    """Newton did not reach the gradient tolerance; expected when the density condition fails."""

    def __init__(self, message: str, iterations: int, gradient_norm: float, potential: Optional[np.ndarray] = None):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        self.potential = potential
        super().__init__(message)


class NotApplicable(UniformizationException):
    """Operation needs girth >= 6."""
    pass


class DensityMethod(Enum):
    BRUTE_FORCE = "brute_force"
    MAX_FLOW = "max_flow"


class WeightClass(Enum):
    REGULAR = "regular"
    SEMI_REGULAR_BIPARTITE = "semi_regular_bipartite"
    NEITHER = "neither"


@dataclass(frozen=True)
class ConstantWeightClass:
    """Graphs on which constant weights have constant curvature."""

    kind: WeightClass
    degrees: Tuple[int, ...] = ()

    def __str__(self) -> str:
        if self.kind == WeightClass.NEITHER:
            return "neither"
        return f"{self.kind.value}({','.join(str(d) for d in self.degrees)})"


@dataclass(frozen=True)
class DensityCertificate:
    satisfied: bool
    global_density: Fraction
    max_proper_density: Fraction
    method: DensityMethod
    witness: Optional[VertexSubset] = None

    def as_dict(self, graph: Optional[Graph] = None) -> Dict[str, object]:
        witness = None
        if self.witness is not None:
            members = self.witness.members()
            witness = {
                "vertices": [graph.label(x) for x in members] if graph is not None else members,
                "size": self.witness.size,
                "internal_edges": self.witness.internal_edges,
                "density": str(self.witness.density),
            }
        return {
            "satisfied": self.satisfied,
            "global_density": str(self.global_density),
            "max_proper_density": str(self.max_proper_density),
            "method": self.method.value,
            "witness": witness,
        }


@dataclass(frozen=True, eq=False)
class UniformizationResult:
    g_star: np.ndarray
    m_star: np.ndarray
    weights: WeightVector
    gradient_norm: float
    iterations: int
    curvature: CurvatureVector
    target_curvature: float
    vertex_residual: float
    edge_residual: float

    def as_dict(self, graph: Optional[Graph] = None) -> Dict[str, object]:
        return {
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "target_curvature": self.target_curvature,
            "vertex_residual": self.vertex_residual,
            "edge_residual": self.edge_residual,
            "g_star": self.g_star.tolist(),
            "m_star": self.m_star.tolist(),
            "weights": self.weights.values.tolist(),
            "curvature": self.curvature.values.tolist(),
        }


def _require_girth(graph: Graph) -> None:
    required = config.get_closed_form_min_girth()
    if graph.girth < required:
        raise NotApplicable(f"Constant-curvature solve needs girth >= {required}, graph has girth {graph.girth}.")


# ----------------------------------------------------------------------
# Density condition by enumeration
# ----------------------------------------------------------------------

def _scan_chunk(graph: Graph, start: int, stop: int) -> Dict[int, Tuple[int, int]]:
    """Best (internal edges, smallest mask) per subset size over masks [start, stop)."""
    masks = np.arange(start, stop, dtype=np.int64)
    sizes = np.zeros(masks.size, dtype=np.int64)
    for x in range(graph.vertex_count):
        sizes += (masks >> x) & 1
    internal = np.zeros(masks.size, dtype=np.int64)
    for u, v in graph.edges:
        internal += ((masks >> u) & 1) & ((masks >> v) & 1)

    best: Dict[int, Tuple[int, int]] = {}
    for size in range(1, graph.vertex_count):
        selected = np.flatnonzero(sizes == size)
        if selected.size == 0:
            continue
        position = selected[int(np.argmax(internal[selected]))]
        best[size] = (int(internal[position]), int(masks[position]))
    return best


def _merge_best(results: Sequence[Dict[int, Tuple[int, int]]]) -> Dict[int, Tuple[int, int]]:
    merged: Dict[int, Tuple[int, int]] = {}
    for result in results:
        for size, (internal, mask) in result.items():
            current = merged.get(size)
            if current is None or internal > current[0] or (internal == current[0] and mask < current[1]):
                merged[size] = (internal, mask)
    return merged


def check_condition_brute(graph: Graph, workers: int = 1, limit: Optional[int] = None) -> DensityCertificate:
    """Enumerate every proper non-empty subset; ties go to the smallest bitmask."""
    limit = config.get_brute_force_limit() if limit is None else limit
    if graph.vertex_count > limit:
        raise SizeError(f"Subset enumeration is limited to {limit} vertices, graph has {graph.vertex_count}.")

    full = (1 << graph.vertex_count) - 1
    bounds = [(start, min(start + CHUNK_SIZE, full)) for start in range(1, full, CHUNK_SIZE)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _scan_chunk(graph, *b), bounds))
    else:
        results = [_scan_chunk(graph, *b) for b in bounds]
    per_size = _merge_best(results)

    best_density: Optional[Fraction] = None
    best_mask = 0
    for size, (internal, mask) in per_size.items():
        density = Fraction(internal, size)
        if best_density is None or density > best_density or (density == best_density and mask < best_mask):
            best_density, best_mask = density, mask

    global_density = Fraction(graph.edge_count, graph.vertex_count)
    satisfied = best_density < global_density
    witness = None if satisfied else VertexSubset.from_mask(graph, best_mask)
    logger.info(
        "Brute-force density check: max proper %s vs %s -> %s",
        best_density,
        global_density,
        "satisfied" if satisfied else "violated",
    )
    return DensityCertificate(satisfied, global_density, best_density, DensityMethod.BRUTE_FORCE, witness)


# ----------------------------------------------------------------------
# Density condition by max flow
# ----------------------------------------------------------------------

def _internal_edges(edges: Sequence[Tuple[int, int]], members: FrozenSet[int]) -> int:
    return sum(1 for u, v in edges if u in members and v in members)


def _max_density_gain(
    vertices: Sequence[int],
    edges: Sequence[Tuple[int, int]],
    p: int,
    q: int,
    forced: Optional[int] = None,
) -> FrozenSet[int]:
    """
    Minimal maximizer of q|E(S)| - p|S| over S within `vertices` (containing
    `forced` when given), from Goldberg's network: a cut with source side S
    costs A|V| - 2(q|E(S)| - p|S|).
    """
    degree = {v: 0 for v in vertices}
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    base = q * len(edges) + 1
    pinned = base * len(vertices) + 2 * p * len(vertices) + 1

    network = nx.DiGraph()
    network.add_node(SOURCE)
    network.add_node(SINK)
    for v in vertices:
        network.add_edge(SOURCE, v, capacity=pinned if v == forced else base)
        network.add_edge(v, SINK, capacity=base + 2 * p - q * degree[v])
    for u, v in edges:
        network.add_edge(u, v, capacity=q)
        network.add_edge(v, u, capacity=q)

    residual = preflow_push(network, SOURCE, SINK)

    # Source side of the minimal minimum cut: residual reachability from the source
    unsaturated = nx.DiGraph()
    unsaturated.add_node(SOURCE)
    unsaturated.add_edges_from(
        (u, v) for u, v, arc in residual.edges(data=True) if arc["capacity"] - arc["flow"] > 0
    )
    return frozenset(nx.descendants(unsaturated, SOURCE))


def densest_within(graph: Graph, vertices: Sequence[int]) -> Tuple[Fraction, FrozenSet[int]]:
    """Densest induced subgraph on `vertices` by Dinkelbach iteration over exact densities."""
    allowed = frozenset(vertices)
    edges = [(u, v) for u, v in graph.edges if u in allowed and v in allowed]
    best = allowed
    density = Fraction(len(edges), len(allowed))
    while True:
        side = _max_density_gain(sorted(allowed), edges, density.numerator, density.denominator)
        internal = _internal_edges(edges, side)
        gain = density.denominator * internal - density.numerator * len(side)
        if not side or gain <= 0:
            return density, best
        best = side
        density = Fraction(internal, len(side))


def _subset_mask(members: FrozenSet[int]) -> int:
    mask = 0
    for x in members:
        mask |= 1 << x
    return mask


def check_condition_flow(graph: Graph) -> DensityCertificate:
    """
    Decide the density condition at the exact threshold |E|/|V| with integer
    capacities (scaled by |V|). Any proper non-empty tight set contains some
    vertex w, so pinning each w to the source side in turn and checking that
    the minimal maximizer is all of V settles the tie. The reported maximum
    proper density is the best densest subgraph of G - u over all u.
    """
    vertices = list(range(graph.vertex_count))
    edges = list(graph.edges)
    p, q = graph.edge_count, graph.vertex_count
    everything = frozenset(vertices)

    violated = False
    side = _max_density_gain(vertices, edges, p, q)
    if side and q * _internal_edges(edges, side) - p * len(side) > 0:
        violated = True
    else:
        for w in vertices:
            pinned_side = _max_density_gain(vertices, edges, p, q, forced=w)
            if pinned_side != everything and q * _internal_edges(edges, pinned_side) - p * len(pinned_side) >= 0:
                violated = True
                break

    best_density: Optional[Fraction] = None
    best_mask = 0
    for u in vertices:
        density, members = densest_within(graph, [x for x in vertices if x != u])
        mask = _subset_mask(members)
        if best_density is None or density > best_density or (density == best_density and mask < best_mask):
            best_density, best_mask = density, mask

    global_density = Fraction(p, q)
    satisfied = not violated
    if satisfied != (best_density < global_density):
        raise UniformizationException(
            f"Max-flow threshold test and densest-subgraph search disagree ({best_density} vs {global_density})."
        )
    witness = None if satisfied else VertexSubset.from_mask(graph, best_mask)
    logger.info(
        "Max-flow density check: max proper %s vs %s -> %s",
        best_density,
        global_density,
        "satisfied" if satisfied else "violated",
    )
    return DensityCertificate(satisfied, global_density, best_density, DensityMethod.MAX_FLOW, witness)


def check_condition(graph: Graph) -> DensityCertificate:
    """Brute force within the enumeration limit, max flow beyond it."""
    if graph.vertex_count <= min(config.get_brute_force_limit(), ENUMERATION_CUTOFF):
        return check_condition_brute(graph)
    return check_condition_flow(graph)


# ----------------------------------------------------------------------
# Classification
# ----------------------------------------------------------------------

def classify_constant_weight(graph: Graph) -> ConstantWeightClass:
    degrees = graph.degrees
    if np.all(degrees == degrees[0]):
        return ConstantWeightClass(WeightClass.REGULAR, (int(degrees[0]),))

    nx_graph = graph.to_networkx()
    if nx.is_bipartite(nx_graph):
        colouring = nx.bipartite.color(nx_graph)
        sides = [
            {int(degrees[x]) for x in range(graph.vertex_count) if colouring[x] == colour} for colour in (0, 1)
        ]
        if all(len(side) == 1 for side in sides):
            a, b = sorted((next(iter(sides[0])), next(iter(sides[1]))), reverse=True)
            return ConstantWeightClass(WeightClass.SEMI_REGULAR_BIPARTITE, (a, b))
    return ConstantWeightClass(WeightClass.NEITHER)


# ----------------------------------------------------------------------
# Convex functional H
# ----------------------------------------------------------------------

def _edge_arrays(graph: Graph) -> Tuple[np.ndarray, np.ndarray]:
    return np.array([e[0] for e in graph.edges]), np.array([e[1] for e in graph.edges])


def _check_potential(graph: Graph, potential: np.ndarray) -> np.ndarray:
    array = np.asarray(potential, dtype=float).reshape(-1)
    if array.size != graph.vertex_count:
        raise ValueError(f"Potential has {array.size} entries, graph has {graph.vertex_count} vertices.")
    if not np.all(np.isfinite(array)):
        raise ValueError("Potential must be finite.")
    return array


def evaluate_H(graph: Graph, potential: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    H(g) = (|E|/|V|) sum g + 1/2 sum_x sum_{y~x} psi(g(y) - g(x)) - 1/2 sum d(z) g(z),
    psi(t) = ln(1 + e^t) evaluated as logaddexp(0, t).

    dH/dg(x) = |E|/|V| - sum_{y~x} 1 / (1 + exp(g(x) - g(y)))
    """
    g = _check_potential(graph, potential)
    u, v = _edge_arrays(graph)
    ratio = graph.edge_count / graph.vertex_count
    diff = g[u] - g[v]

    value = (
        ratio * g.sum()
        + 0.5 * float(np.sum(np.logaddexp(0.0, diff) + np.logaddexp(0.0, -diff)))
        - 0.5 * float(graph.degrees @ g)
    )
    # 1 / (1 + e^t) in tanh form stays finite for any t
    toward_v = 0.5 * (1.0 - np.tanh(0.5 * diff))
    gradient = np.full(graph.vertex_count, ratio)
    np.subtract.at(gradient, u, toward_v)
    np.subtract.at(gradient, v, 1.0 - toward_v)
    return float(value), gradient


def hessian_H(graph: Graph, potential: np.ndarray) -> np.ndarray:
    """Weighted Laplacian with edge weights e^t / (1 + e^t)^2, t = g(x) - g(y)."""
    g = _check_potential(graph, potential)
    u, v = _edge_arrays(graph)
    diff = g[u] - g[v]
    weights = 0.25 * (1.0 - np.tanh(0.5 * diff) ** 2)
    hessian = np.zeros((graph.vertex_count, graph.vertex_count))
    np.add.at(hessian, (u, v), -weights)
    np.add.at(hessian, (v, u), -weights)
    np.add.at(hessian, (u, u), weights)
    np.add.at(hessian, (v, v), weights)
    return hessian


def recover_weights(graph: Graph, potential: np.ndarray) -> WeightVector:
    """w(x, y) = (|V|/|E|) m(x) m(y) / (m(x) + m(y)) with m = exp(g)."""
    g = _check_potential(graph, potential)
    u, v = _edge_arrays(graph)
    # m(x) m(y) / (m(x) + m(y)) = 1 / (exp(-g(x)) + exp(-g(y)))
    harmonic = 1.0 / (np.exp(-g[u]) + np.exp(-g[v]))
    return WeightVector(graph.vertex_count / graph.edge_count * harmonic)


def solve_constant_weights(
    graph: Graph,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    max_potential_spread: Optional[float] = None,
    max_halvings: Optional[int] = None,
) -> UniformizationResult:
    """
    Damped Newton on the zero-mean subspace from g = 0. Each step solves
    (Hess + 11^T / n) s = -grad and is halved until H decreases. Raises
    DivergenceError when max_iter is exhausted or the potential spread blows
    past max_potential_spread (H is not coercive when the density condition
    fails).
    """
    _require_girth(graph)
    defaults = config.get_uniformization_defaults()
    tol = defaults["tol"] if tol is None else tol
    max_iter = defaults["max_iter"] if max_iter is None else max_iter
    max_spread = defaults["max_potential_spread"] if max_potential_spread is None else max_potential_spread
    max_halvings = defaults["max_halvings"] if max_halvings is None else max_halvings

    n = graph.vertex_count
    g = np.zeros(n)
    projector = np.full((n, n), 1.0 / n)
    value, gradient = evaluate_H(graph, g)
    grad_norm = float(np.max(np.abs(gradient)))
    iterations = 0

    while grad_norm > tol:
        if iterations >= max_iter:
            raise DivergenceError(
                f"Newton stopped after {iterations} iterations with |grad H| = {grad_norm:.3e}.",
                iterations, grad_norm, g,
            )
        step = np.linalg.solve(hessian_H(graph, g) + projector, -gradient)

        scale = 1.0
        for _ in range(max_halvings + 1):
            candidate = g + scale * step
            candidate -= candidate.mean()
            candidate_value, candidate_gradient = evaluate_H(graph, candidate)
            candidate_norm = float(np.max(np.abs(candidate_gradient)))
            flat = abs(candidate_value - value) <= 1e-14 * (1.0 + abs(value))
            if candidate_value < value or (flat and candidate_norm < grad_norm):
                break
            scale *= 0.5
        else:
            raise DivergenceError(
                f"Line search found no decrease at iteration {iterations} (|grad H| = {grad_norm:.3e}).",
                iterations, grad_norm, g,
            )

        g, value, gradient, grad_norm = candidate, candidate_value, candidate_gradient, candidate_norm
        iterations += 1
        spread = float(g.max() - g.min())
        logger.debug("Newton iteration %d: H=%.15g |grad|=%.3e step scale=%g spread=%.3g",
                     iterations, value, grad_norm, scale, spread)
        if spread > max_spread:
            raise DivergenceError(
                f"Potential spread {spread:.3g} exceeds {max_spread:g} at iteration {iterations}; "
                "H is not coercive on this graph.",
                iterations, grad_norm, g,
            )

    weights = recover_weights(graph, g)
    kappa = curvature_vector(graph, weights)
    target = average_curvature(graph)
    result = UniformizationResult(
        g_star=g,
        m_star=np.exp(g),
        weights=weights,
        gradient_norm=grad_norm,
        iterations=iterations,
        curvature=kappa,
        target_curvature=target,
        vertex_residual=float(np.max(np.abs(gradient))),  # per-vertex mass balance
        edge_residual=float(np.max(np.abs(kappa.values - target))),
    )
    logger.info("Newton converged in %d iterations, |grad H| = %.3e", iterations, grad_norm)
    return result


# ----------------------------------------------------------------------
# Attainability of general targets
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AttainabilityOutcome:
    report: ConvergenceReport
    trajectory: FlowTrajectory

    @property
    def attained(self) -> bool:
        return self.report.converged


def attainability_probe(
    graph: Graph,
    target: PrescribedCurvature,
    options: Optional[IntegratorOptions] = None,
    verify_tol: float = 1e-6,
) -> ConvergenceReport:
    """
    Run the flow from unit weights toward `target`. A converged run certifies
    attainability and carries the realizing weights; a run that reaches t_max
    is reported as unattained within the horizon, which does not prove that
    no realizing weights exist.
    """
    return probe_attainability(graph, target, options, verify_tol).report


def probe_attainability(
    graph: Graph,
    target: PrescribedCurvature,
    options: Optional[IntegratorOptions] = None,
    verify_tol: float = 1e-6,
) -> AttainabilityOutcome:
    """attainability_probe that also returns the trajectory."""
    _require_girth(graph)
    if not target.is_consistent(graph):
        raise ConsistencyError(
            f"Target sums to {float(target.values.sum()):.12g}, expected 2(|V|-|E|) = {total_curvature(graph)}."
        )
    options = options if options is not None else IntegratorOptions.from_config()
    trajectory = integrate(graph, WeightVector.ones(graph), target, options)
    report = convergence_report(trajectory, target, tol=options.tol)

    if report.converged:
        check = curvature_vector(graph, report.limit_weights)
        mismatch = float(np.max(np.abs(check.values - target.values)))
        if mismatch > verify_tol:
            logger.warning("Limit curvature misses the target by %.3e (> %.1e)", mismatch, verify_tol)
        else:
            logger.info("Target attained at t=%.6g", trajectory.final.t)
    else:
        logger.info(
            "Target unattained within t_max=%g (residual %.3e); this does not prove non-existence.",
            options.t_max,
            report.residual,
        )
    return AttainabilityOutcome(report=report, trajectory=trajectory)
