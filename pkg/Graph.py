"""
Graph - combinatorial core shared by every other module.

A Graph is immutable after construction: vertices are dense 0-based indices,
edges keep their input order (edge index i is edge e_i for the whole run), and
metric queries use the unweighted hop distance. Weights live separately in a
WeightVector so one Graph can carry many weightings along a flow.
"""
from __future__ import annotations

import json
import logging
import math
import os
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

# Returned by girth() for acyclic graphs
INFINITE_GIRTH = math.inf


class GraphException(Exception):
    pass


class GraphParseError(GraphException):
    """Malformed edge-list line or structured record."""

    def __init__(self, message: str, line_number: Optional[int] = None, source: Optional[str] = None):
        self.line_number = line_number
        self.source = source
        context = ""
        if source is not None:
            context += f"{source}"
        if line_number is not None:
            context += f":{line_number}" if context else f"line {line_number}"
        super().__init__(f"{context}: {message}" if context else message)


class GraphValidationError(GraphException):
    """Input parsed but violates a graph invariant (loop, duplicate, disconnected, empty)."""
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Finite, simple, connected, undirected graph.

    vertex_count: number of vertices
    edges: ordered (u, v) pairs, edge index i <-> edges[i]
    vertex_labels: optional external names, one per vertex
    """

    vertex_count: int
    edges: Tuple[Tuple[int, int], ...]
    vertex_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.vertex_count <= 0:
            raise GraphValidationError("Graph must have at least one vertex.")
        if not self.edges:
            raise GraphValidationError("Graph must have at least one edge.")
        if self.vertex_labels is not None and len(self.vertex_labels) != self.vertex_count:
            raise GraphValidationError(
                f"Expected {self.vertex_count} vertex labels, got {len(self.vertex_labels)}."
            )

        seen = set()
        for index, (u, v) in enumerate(self.edges):
            for endpoint in (u, v):
                if not 0 <= endpoint < self.vertex_count:
                    raise GraphValidationError(f"Edge {index} ({u}, {v}) references unknown vertex {endpoint}.")
            if u == v:
                raise GraphValidationError(f"Self-loop at vertex {self.label(u)} (edge {index}).")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphValidationError(
                    f"Duplicate edge ({self.label(u)}, {self.label(v)}) at edge {index}."
                )
            seen.add(key)

        if not nx.is_connected(self.to_networkx()):
            raise GraphValidationError("Graph is disconnected.")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Tuple[int, int]],
        vertex_count: Optional[int] = None,
        vertex_labels: Optional[Sequence[str]] = None,
    ) -> "Graph":
        edge_tuple = tuple((int(u), int(v)) for u, v in edges)
        if vertex_count is None:
            vertex_count = 1 + max((max(u, v) for u, v in edge_tuple), default=-1)
        labels = tuple(str(label) for label in vertex_labels) if vertex_labels is not None else None
        return cls(vertex_count=vertex_count, edges=edge_tuple, vertex_labels=labels)

    # ------------------------------------------------------------------
    # Structure
    # ------------------------------------------------------------------
    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
        """Per-vertex list of (neighbor, edge index), in edge order."""
        table: List[List[Tuple[int, int]]] = [[] for _ in range(self.vertex_count)]
        for index, (u, v) in enumerate(self.edges):
            table[u].append((v, index))
            table[v].append((u, index))
        return tuple(tuple(entries) for entries in table)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(entries) for entries in self.adjacency], dtype=int)

    @cached_property
    def _edge_lookup(self) -> Dict[Tuple[int, int], int]:
        lookup = {}
        for index, (u, v) in enumerate(self.edges):
            lookup[(u, v)] = index
            lookup[(v, u)] = index
        return lookup

    @cached_property
    def incidence(self) -> np.ndarray:
        """|V| x |E| unsigned incidence matrix (1 where vertex touches edge)."""
        matrix = np.zeros((self.vertex_count, self.edge_count))
        for index, (u, v) in enumerate(self.edges):
            matrix[u, index] = 1.0
            matrix[v, index] = 1.0
        return matrix

    def degree(self, x: int) -> int:
        return int(self.degrees[x])

    def edge_index(self, u: int, v: int) -> int:
        try:
            return self._edge_lookup[(u, v)]
        except KeyError as exc:
            raise KeyError(f"No edge between {self.label(u)} and {self.label(v)}") from exc

    def label(self, x: int) -> str:
        if self.vertex_labels is None:
            return str(x)
        return self.vertex_labels[x]

    def edge_label(self, index: int) -> str:
        u, v = self.edges[index]
        return f"{self.label(u)}-{self.label(v)}"

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.vertex_count))
        for index, (u, v) in enumerate(self.edges):
            graph.add_edge(u, v, index=index)
        return graph

    # ------------------------------------------------------------------
    # Metric
    # ------------------------------------------------------------------
    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """All-pairs hop distances."""
        distances = np.zeros((self.vertex_count, self.vertex_count), dtype=int)
        for source, lengths in nx.all_pairs_shortest_path_length(self.to_networkx()):
            for target, length in lengths.items():
                distances[source, target] = length
        return distances

    @cached_property
    def girth(self) -> float:
        """Shortest cycle length via per-root BFS with cross-edge detection."""
        best = INFINITE_GIRTH
        for root in range(self.vertex_count):
            depth = {root: 0}
            parent_edge = {root: -1}
            queue = deque([root])
            while queue:
                u = queue.popleft()
                # No shorter cycle can be closed from deeper levels
                if 2 * depth[u] + 1 >= best:
                    break
                for w, index in self.adjacency[u]:
                    if index == parent_edge[u]:
                        continue
                    if w not in depth:
                        depth[w] = depth[u] + 1
                        parent_edge[w] = index
                        queue.append(w)
                    else:
                        best = min(best, depth[u] + depth[w] + 1)
        return best


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Strictly positive edge weights, indexed like Graph.edges."""

    values: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=float).reshape(-1)
        if array.size == 0:
            raise GraphValidationError("Weight vector is empty.")
        if not np.all(np.isfinite(array)):
            raise GraphValidationError("Weights must be finite.")
        if np.any(array <= 0.0):
            bad = int(np.argmin(array))
            raise GraphValidationError(f"Weights must be strictly positive (edge {bad} has {array[bad]}).")
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    @classmethod
    def ones(cls, graph: Graph) -> "WeightVector":
        return cls(np.ones(graph.edge_count))

    @classmethod
    def from_log(cls, r: np.ndarray) -> "WeightVector":
        return cls(np.exp(np.asarray(r, dtype=float)))

    @classmethod
    def random(cls, graph: Graph, rng: np.random.Generator, low: float = 0.5, high: float = 1.5) -> "WeightVector":
        return cls(rng.uniform(low, high, size=graph.edge_count))

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])

    def check_against(self, graph: Graph) -> "WeightVector":
        if len(self) != graph.edge_count:
            raise GraphValidationError(
                f"Weight vector has {len(self)} entries but graph has {graph.edge_count} edges."
            )
        return self

    def log(self) -> np.ndarray:
        return np.log(self.values)

    def scaled(self, factor: float) -> "WeightVector":
        return WeightVector(self.values * factor)

    def normalized(self) -> "WeightVector":
        """Rescale so the weights sum to 1."""
        return WeightVector(self.values / self.values.sum())

    def masses(self, graph: Graph) -> np.ndarray:
        """m(x) = sum of incident edge weights, for every vertex."""
        self.check_against(graph)
        return graph.incidence @ self.values


@dataclass(frozen=True)
class VertexSubset:
    """
    Vertex subset Omega as a bitmask, with cached |Omega|, |E(Omega)| and
    |E(Omega, Omega^c)|.
    """

    mask: int
    size: int
    internal_edges: int
    boundary_edges: int

    @classmethod
    def from_mask(cls, graph: Graph, mask: int) -> "VertexSubset":
        if mask <= 0 or mask >= (1 << graph.vertex_count):
            raise GraphValidationError(f"Subset mask {mask} is empty or out of range.")
        internal = 0
        boundary = 0
        for u, v in graph.edges:
            inside_u = (mask >> u) & 1
            inside_v = (mask >> v) & 1
            if inside_u and inside_v:
                internal += 1
            elif inside_u or inside_v:
                boundary += 1
        return cls(mask=mask, size=bin(mask).count("1"), internal_edges=internal, boundary_edges=boundary)

    @classmethod
    def from_vertices(cls, graph: Graph, vertices: Iterable[int]) -> "VertexSubset":
        mask = 0
        for x in vertices:
            if not 0 <= x < graph.vertex_count:
                raise GraphValidationError(f"Unknown vertex {x}.")
            mask |= 1 << x
        return cls.from_mask(graph, mask)

    def members(self) -> List[int]:
        return [x for x in range(self.mask.bit_length()) if (self.mask >> x) & 1]

    def __contains__(self, x: int) -> bool:
        return bool((self.mask >> x) & 1)

    @property
    def density(self) -> Fraction:
        return Fraction(self.internal_edges, self.size)

    def is_proper(self, graph: Graph) -> bool:
        return self.size < graph.vertex_count


# ----------------------------------------------------------------------
# Graph queries
# ----------------------------------------------------------------------

def hop_distance(graph: Graph, u: int, v: int) -> int:
    """Number of edges on a shortest u-v path."""
    return int(graph.distance_matrix[u, v])


def girth(graph: Graph) -> float:
    """Length of the shortest cycle, INFINITE_GIRTH for trees."""
    return graph.girth


def vertex_mass(graph: Graph, weights: WeightVector, x: int) -> float:
    """m(x) = sum over y ~ x of w_xy."""
    weights.check_against(graph)
    return float(sum(weights.values[index] for _, index in graph.adjacency[x]))


def subset_stats(graph: Graph, subset: VertexSubset) -> Tuple[int, int, int]:
    """(|Omega|, |E(Omega)|, |E(Omega, Omega^c)|), recomputed against the graph."""
    fresh = VertexSubset.from_mask(graph, subset.mask)
    return fresh.size, fresh.internal_edges, fresh.boundary_edges


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------

def parse_edge_list(text: str, source: Optional[str] = None) -> Tuple[Graph, WeightVector]:
    """
    Parse `u v [weight]` lines. '#' starts a comment, labels are arbitrary
    tokens indexed by first appearance, missing weights default to 1.0.
    """
    label_index: Dict[str, int] = {}
    labels: List[str] = []
    edges: List[Tuple[int, int]] = []
    weights: List[float] = []

    def index_for(token: str) -> int:
        if token not in label_index:
            label_index[token] = len(labels)
            labels.append(token)
        return label_index[token]

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise GraphParseError(
                f"Expected 'u v [weight]', got {len(tokens)} fields: '{raw.strip()}'",
                line_number=line_number,
                source=source,
            )
        weight = 1.0
        if len(tokens) == 3:
            try:
                weight = float(tokens[2])
            except ValueError:
                raise GraphParseError(
                    f"Could not parse weight '{tokens[2]}'", line_number=line_number, source=source
                )
        edges.append((index_for(tokens[0]), index_for(tokens[1])))
        weights.append(weight)

    if not edges:
        raise GraphValidationError(f"{source or 'input'}: no edges found.")

    graph = Graph.from_edges(edges, vertex_count=len(labels), vertex_labels=labels)
    logger.debug("Parsed edge list %s: |V|=%d |E|=%d", source or "<text>", graph.vertex_count, graph.edge_count)
    return graph, WeightVector(np.array(weights)).check_against(graph)


def parse_structured(document: Mapping[str, object], source: Optional[str] = None) -> Tuple[Graph, WeightVector]:
    """
    Parse the JSON document form:
        {"vertices": ["a", "b", ...], "edges": [{"u": "a", "v": "b", "w": 1.0}, ...]}
    "w" is optional (default 1.0). "vertices" is optional; when absent, labels
    are indexed by first appearance in "edges".
    """
    if not isinstance(document, Mapping) or "edges" not in document:
        raise GraphParseError("Structured graph needs an 'edges' list.", source=source)

    labels: List[str] = [str(label) for label in document.get("vertices", [])]
    if len(set(labels)) != len(labels):
        raise GraphValidationError(f"{source or 'input'}: duplicate vertex labels.")
    declared = bool(labels)
    label_index = {label: i for i, label in enumerate(labels)}

    edges: List[Tuple[int, int]] = []
    weights: List[float] = []
    for record_number, record in enumerate(document["edges"], start=1):
        if not isinstance(record, Mapping) or "u" not in record or "v" not in record:
            raise GraphParseError("Edge record needs 'u' and 'v'.", line_number=record_number, source=source)
        endpoints = []
        for key in ("u", "v"):
            token = str(record[key])
            if token not in label_index:
                if declared:
                    raise GraphParseError(
                        f"Edge references undeclared vertex '{token}'.", line_number=record_number, source=source
                    )
                label_index[token] = len(labels)
                labels.append(token)
            endpoints.append(label_index[token])
        try:
            weights.append(float(record.get("w", 1.0)))
        except (TypeError, ValueError):
            raise GraphParseError(f"Could not parse weight '{record.get('w')}'", line_number=record_number, source=source)
        edges.append((endpoints[0], endpoints[1]))

    graph = Graph.from_edges(edges, vertex_count=len(labels), vertex_labels=labels)
    return graph, WeightVector(np.array(weights)).check_against(graph)


def load_weighted_graph(source: Union[str, Path, Mapping[str, object]]) -> Tuple[Graph, WeightVector]:
    """
    Load a graph and its weights from a path, edge-list text, or a parsed
    structured document. Files ending in .json use the structured format.
    """
    if isinstance(source, Mapping):
        return parse_structured(source)

    path: Optional[Path] = None
    if isinstance(source, Path):
        path = source
    elif isinstance(source, str) and "\n" not in source and os.path.isfile(source):
        path = Path(source)

    if path is None:
        return parse_edge_list(str(source))

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise GraphParseError(f"Could not read graph file: {e}", source=str(path))
    except UnicodeDecodeError as e:
        raise GraphParseError(f"Graph file is not UTF-8 text: {e.reason} at byte {e.start}", source=str(path))

    if path.suffix.lower() == ".json":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise GraphParseError(f"Invalid JSON: {e.msg}", line_number=e.lineno, source=str(path))
        return parse_structured(document, source=str(path))
    return parse_edge_list(text, source=str(path))


def load_graph(source: Union[str, Path, Mapping[str, object]]) -> Graph:
    """Load and validate a Graph; weights in the source are ignored."""
    graph, _ = load_weighted_graph(source)
    return graph

