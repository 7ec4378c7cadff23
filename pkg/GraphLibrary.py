"""
Named graph constructions used by the tests and the CLI.

Vertex numbering follows the usual textbook layouts so edge indices can be
cited directly: cycles run 0..n-1, dumbbells put the left cycle first and the
bridge last, generalized Petersen graphs list outer, spoke, then inner edges.
"""
from __future__ import annotations

import logging
from typing import Callable, Dict, List, Sequence, Tuple

from Graph import Graph, GraphValidationError

logger = logging.getLogger(__name__)


def path_graph(n: int) -> Graph:
    if n < 2:
        raise GraphValidationError("A path needs at least two vertices.")
    return Graph.from_edges([(i, i + 1) for i in range(n - 1)], vertex_count=n)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphValidationError("A cycle needs at least three vertices.")
    return Graph.from_edges([(i, (i + 1) % n) for i in range(n)], vertex_count=n)


def star_graph(leaves: int) -> Graph:
    """K_{1,leaves}; vertex 0 is the center."""
    if leaves < 1:
        raise GraphValidationError("A star needs at least one leaf.")
    return Graph.from_edges([(0, i) for i in range(1, leaves + 1)], vertex_count=leaves + 1)


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise GraphValidationError("A complete graph needs at least two vertices.")
    return Graph.from_edges([(i, j) for i in range(n) for j in range(i + 1, n)], vertex_count=n)


def generalized_petersen(n: int, k: int) -> Graph:
    """
    GP(n, k): outer cycle 0..n-1, spokes i - (n + i), inner edges
    (n + i) - (n + (i + k) mod n).
    """
    if n < 3 or not 1 <= k < n / 2:
        raise GraphValidationError(f"GP({n},{k}) needs n >= 3 and 1 <= k < n/2.")
    outer = [(i, (i + 1) % n) for i in range(n)]
    spokes = [(i, n + i) for i in range(n)]
    inner = [(n + i, n + (i + k) % n) for i in range(n)]
    return Graph.from_edges(outer + spokes + inner, vertex_count=2 * n)


def dumbbell(a: int, b: int) -> Graph:
    """D_{a,b}: cycle 0..a-1, cycle a..a+b-1, bridge (0, a) as the last edge."""
    left = [(i, (i + 1) % a) for i in range(a)]
    right = [(a + i, a + (i + 1) % b) for i in range(b)]
    return Graph.from_edges(left + right + [(0, a)], vertex_count=a + b)


def tadpole(a: int, b: int) -> Graph:
    """T_{a,b}: cycle 0..a-1 with a path of b extra vertices hanging off vertex 0."""
    cycle = [(i, (i + 1) % a) for i in range(a)]
    tail = []
    previous = 0
    for j in range(b):
        tail.append((previous, a + j))
        previous = a + j
    return Graph.from_edges(cycle + tail, vertex_count=a + b)


def heawood() -> Graph:
    """Heawood graph: 14-cycle plus chords i - (i + 5) for even i (LCF [5,-5]^7)."""
    ring = [(i, (i + 1) % 14) for i in range(14)]
    chords = [(i, (i + 5) % 14) for i in range(0, 14, 2)]
    return Graph.from_edges(ring + chords, vertex_count=14)


def heawood_hexagon_dumbbell() -> Graph:
    """Heawood graph (0..13) joined to a hexagon (14..19) by the bridge (3, 17)."""
    base = list(heawood().edges)
    hexagon = [(14 + i, 14 + (i + 1) % 6) for i in range(6)]
    return Graph.from_edges(base + hexagon + [(3, 17)], vertex_count=20)


def subdivide_edge(graph: Graph, u: int, v: int) -> Graph:
    """
    Replace edge (u, v) by (u, new) and (new, v), where new = vertex_count.
    Both halves take the position of the removed edge in the edge order.
    """
    index = graph.edge_index(u, v)
    new = graph.vertex_count
    edges: List[Tuple[int, int]] = list(graph.edges)
    edges[index:index + 1] = [(u, new), (new, v)]
    return Graph.from_edges(edges, vertex_count=graph.vertex_count + 1)


def delete_edge(graph: Graph, u: int, v: int) -> Graph:
    index = graph.edge_index(u, v)
    edges = [edge for i, edge in enumerate(graph.edges) if i != index]
    return Graph.from_edges(edges, vertex_count=graph.vertex_count)


def gp83_asymmetric() -> Graph:
    """GP(8,3) with edge (0,1) subdivided by vertex 16 and edge (5,6) removed."""
    return delete_edge(subdivide_edge(generalized_petersen(8, 3), 0, 1), 5, 6)


# Named edge classes of the flow-report builtins, by endpoint pairs
EDGE_CLASSES: Dict[str, Dict[str, Sequence[Tuple[int, int]]]] = {
    "d6_6": {
        "bridge": [(0, 6)],
        "bridge_adjacent": [(0, 1), (0, 5), (6, 7), (6, 11)],
        "middle": [(1, 2), (4, 5), (7, 8), (10, 11)],
        "far": [(2, 3), (3, 4), (8, 9), (9, 10)],
    },
    "gp83_asym": {
        "subdivision": [(0, 16), (16, 1)],
        "orange": [(4, 5), (5, 13), (6, 7), (6, 14)],
        "purple": [(0, 7)],
    },
}

# Class that collects every edge not listed explicitly
REMAINDER_CLASS = {"gp83_asym": "blue"}


def edge_classes(name: str, graph: Graph) -> Dict[str, List[int]]:
    """Edge-index partition for a builtin with named edge classes, else {}."""
    spec = EDGE_CLASSES.get(name)
    if spec is None:
        return {}
    classes = {label: sorted(graph.edge_index(u, v) for u, v in pairs) for label, pairs in spec.items()}
    remainder = REMAINDER_CLASS.get(name)
    if remainder is not None:
        listed = {index for indices in classes.values() for index in indices}
        classes[remainder] = [i for i in range(graph.edge_count) if i not in listed]
    return classes


BUILTIN_GRAPHS: Dict[str, Callable[[], Graph]] = {
    "k2": lambda: complete_graph(2),
    "p3": lambda: path_graph(3),
    "p4": lambda: path_graph(4),
    "c6": lambda: cycle_graph(6),
    "star_1_3": lambda: star_graph(3),
    "d6_6": lambda: dumbbell(6, 6),
    "tadpole_6_1": lambda: tadpole(6, 1),
    "heawood": heawood,
    "heawood_hex": heawood_hexagon_dumbbell,
    "gp_8_3": lambda: generalized_petersen(8, 3),
    "gp83_asym": gp83_asymmetric,
    "triangle": lambda: complete_graph(3),
    "k4": lambda: complete_graph(4),
}


def builtin_names() -> List[str]:
    return sorted(BUILTIN_GRAPHS)


def build(name: str) -> Graph:
    try:
        builder = BUILTIN_GRAPHS[name]
    except KeyError:
        raise GraphValidationError(f"Unknown builtin graph '{name}'. Available: {', '.join(builtin_names())}")
    graph = builder()
    logger.debug("Built %s: |V|=%d |E|=%d", name, graph.vertex_count, graph.edge_count)
    return graph
