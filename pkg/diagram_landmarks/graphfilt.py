"""
Vertex descriptors on graphs and their extended-persistence diagrams.
"""
import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from joblib import Parallel, delayed
from networkx.utils import UnionFind
from scipy.linalg import eigh

from diagram_landmarks.diagram import DiagramPoint, PersistenceDiagram, filter_top_n
from diagram_landmarks.errors import DataError, NumericGuardError

logger = logging.getLogger(__name__)

EIGEN_VERTEX_CAP = 512
DESCRIPTOR_KINDS = ("degree", "closeness", "hks", "table")


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""
    n_vertices: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.n_vertices < 0:
            raise ValueError(f"Vertex count must be non-negative, got {self.n_vertices}")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"Self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"Edge ({u}, {v}) references a vertex outside [0, {self.n_vertices})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"Duplicate edge ({u}, {v})")
            seen.add(key)

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Sequence[Tuple[int, int]]) -> 'Graph':
        """Build a graph, normalizing each edge to (min, max) and dropping repeats."""
        normalized = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
        return cls(n_vertices, tuple(normalized))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        graph.add_edges_from(self.edges)
        return graph


@dataclass(frozen=True, eq=False)
class VertexFunction:
    """Real value per vertex, in vertex order."""
    values: np.ndarray
    descriptor_name: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"Vertex function {self.descriptor_name} has non-finite values")

    def __len__(self) -> int:
        return len(self.values)


def descriptor_degree(graph: Graph) -> VertexFunction:
    """Vertex degrees."""
    degrees = np.zeros(graph.n_vertices)
    for u, v in graph.edges:
        degrees[u] += 1
        degrees[v] += 1
    return VertexFunction(degrees, "degree")


def descriptor_hks(graph: Graph, t: float) -> VertexFunction:
    """
    Heat kernel signature sum_i exp(-t lambda_i) phi_i(v)^2 of the unnormalized Laplacian.

    Raises:
        NumericGuardError: If the graph exceeds the dense eigensolver cap
    """
    n = graph.n_vertices
    if n > EIGEN_VERTEX_CAP:
        logger.warning("Graph with %d vertices exceeds the eigensolver cap %d", n, EIGEN_VERTEX_CAP)
        raise NumericGuardError(f"HKS needs at most {EIGEN_VERTEX_CAP} vertices, got {n}")
    if n == 0:
        return VertexFunction(np.zeros(0), f"hks:{t:g}")
    laplacian = nx.laplacian_matrix(graph.to_networkx(), nodelist=range(n)).toarray().astype(float)
    eigenvalues, eigenvectors = eigh(laplacian)
    values = np.square(eigenvectors) @ np.exp(-t * eigenvalues)
    return VertexFunction(values, f"hks:{t:g}")


def descriptor_closeness(graph: Graph) -> VertexFunction:
    """Per-component closeness 1 / sum of hop distances; isolated vertices get 0."""
    nx_graph = graph.to_networkx()
    values = np.zeros(graph.n_vertices)
    for v in range(graph.n_vertices):
        total = sum(nx.single_source_shortest_path_length(nx_graph, v).values())
        values[v] = 1.0 / total if total > 0 else 0.0
    return VertexFunction(values, "closeness")


@dataclass(frozen=True)
class DescriptorPart:
    """One component of a descriptor name such as "degree+hks:10"."""
    kind: str
    argument: Optional[str] = None

    @property
    def label(self) -> str:
        return self.kind if self.argument is None else f"{self.kind}:{self.argument}"


def parse_descriptor(name: str) -> List[DescriptorPart]:
    """
    Parse "degree", "closeness", "hks:<t>", "table:<path>" and '+'-joined pools.

    Raises:
        ValueError: On an unknown kind or a malformed argument
    """
    parts = []
    for raw in name.split("+"):
        raw = raw.strip()
        kind, _, argument = raw.partition(":")
        if kind not in DESCRIPTOR_KINDS:
            raise ValueError(f"Unknown descriptor: {raw}")
        if kind == "hks":
            try:
                t = float(argument)
            except ValueError as e:
                raise ValueError(f"HKS descriptor needs a numeric time, got {raw}") from e
            if t <= 0:
                raise ValueError(f"HKS time must be positive, got {t}")
        elif kind == "table" and not argument:
            raise ValueError("Table descriptor needs a file path")
        elif kind in ("degree", "closeness") and argument:
            raise ValueError(f"Descriptor {kind} takes no argument")
        parts.append(DescriptorPart(kind, argument or None))
    return parts


def descriptor_slug(name: str) -> str:
    """File-name-safe form of a descriptor name."""
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", name)


def vertex_function(graph: Graph, part: DescriptorPart,
                    table_values: Optional[np.ndarray] = None) -> VertexFunction:
    """Evaluate one descriptor component on a graph."""
    if part.kind == "degree":
        return descriptor_degree(graph)
    if part.kind == "closeness":
        return descriptor_closeness(graph)
    if part.kind == "hks":
        return descriptor_hks(graph, float(part.argument))
    if table_values is None:
        raise ValueError(f"Descriptor {part.label} needs table values")
    if len(table_values) != graph.n_vertices:
        raise DataError(
            f"Vertex function table has {len(table_values)} values for a graph of {graph.n_vertices} vertices"
        )
    return VertexFunction(np.asarray(table_values, dtype=float), part.label)


def _bar(birth: float, death: float) -> Optional[DiagramPoint]:
    return DiagramPoint(birth, death) if death > birth else None


def extended_persistence(graph: Graph, f: VertexFunction) -> Tuple[PersistenceDiagram, PersistenceDiagram]:
    """
    Extended persistence of the lower-star filtration of f.

    Edges enter at max f of their endpoints, ordered by (max f, min f, edge
    index). A merge kills the younger component (larger birth, then larger
    root vertex). Each component contributes an essential H0 bar (min f, max f)
    and each cycle-closing edge at value w an H1 bar (w, max f of its final
    component). Zero-length bars are dropped.

    Returns:
        Tuple[PersistenceDiagram, PersistenceDiagram]: H0 and H1 diagrams, points sorted

    Raises:
        DataError: If f is negative somewhere or its length differs from the vertex count
    """
    values = np.asarray(f.values, dtype=float)
    if len(values) != graph.n_vertices:
        raise DataError(f"Vertex function has {len(values)} values for {graph.n_vertices} vertices")
    if len(values) and values.min() < 0:
        raise DataError(f"Vertex function {f.descriptor_name} takes negative values")

    order = sorted(
        range(len(graph.edges)),
        key=lambda e: (max(values[graph.edges[e][0]], values[graph.edges[e][1]]),
                       min(values[graph.edges[e][0]], values[graph.edges[e][1]]), e),
    )
    components = UnionFind(range(graph.n_vertices))
    # root -> (birth value, vertex attaining it)
    oldest: Dict[int, Tuple[float, int]] = {v: (values[v], v) for v in range(graph.n_vertices)}
    h0: List[DiagramPoint] = []
    closing: List[Tuple[float, int]] = []

    for e in order:
        u, v = graph.edges[e]
        w = max(values[u], values[v])
        ru, rv = components[u], components[v]
        if ru == rv:
            closing.append((w, u))
            continue
        elder, younger = sorted((oldest.pop(ru), oldest.pop(rv)))
        bar = _bar(younger[0], w)
        if bar is not None:
            h0.append(bar)
        components.union(ru, rv)
        oldest[components[u]] = elder

    top: Dict[int, float] = {}
    for v in range(graph.n_vertices):
        root = components[v]
        top[root] = max(top.get(root, -np.inf), values[v])
    for root, (birth, _) in oldest.items():
        bar = _bar(birth, top[root])
        if bar is not None:
            h0.append(bar)

    h1 = [bar for bar in (_bar(w, top[components[u]]) for w, u in closing) if bar is not None]

    def ordered(points: List[DiagramPoint]) -> Tuple[DiagramPoint, ...]:
        return tuple(sorted(points, key=lambda p: (p.birth, p.death)))

    logger.debug("Extended persistence: %d H0 bars, %d H1 bars", len(h0), len(h1))
    return PersistenceDiagram(ordered(h0), 0), PersistenceDiagram(ordered(h1), 1)


def pool_descriptors(diagrams: Sequence[PersistenceDiagram], n_max: int = 50) -> PersistenceDiagram:
    """Multiset union of diagrams, keeping the n_max most persistent points."""
    if not diagrams:
        raise ValueError("Nothing to pool")
    pooled = diagrams[0]
    for diagram in diagrams[1:]:
        pooled = pooled.union(diagram)
    return filter_top_n(pooled, n_max)


def diagram_for_descriptor(graph: Graph, parts: Sequence[DescriptorPart], n_max: int = 50,
                           tables: Optional[Dict[str, np.ndarray]] = None) -> PersistenceDiagram:
    """
    Pooled H0 and H1 diagram of a graph under every component of a descriptor.

    Args:
        graph: Input graph
        parts: Parsed descriptor components
        n_max: Point budget of the pooled diagram
        tables: Table descriptor label -> this graph's vertex values
    """
    diagrams = []
    for part in parts:
        table_values = tables.get(part.label) if tables else None
        h0, h1 = extended_persistence(graph, vertex_function(graph, part, table_values))
        diagrams.extend([h0, h1])
    return pool_descriptors(diagrams, n_max)


def corpus_diagrams(graphs: Sequence[Graph], descriptor: str, n_max: int = 50,
                    tables: Optional[Dict[str, Sequence[np.ndarray]]] = None,
                    n_jobs: int = 1) -> List[PersistenceDiagram]:
    """
    Diagrams of every graph under a descriptor, in input order.

    Args:
        graphs: Graph corpus
        descriptor: Descriptor name, see parse_descriptor
        n_max: Point budget per pooled diagram
        tables: Table descriptor label -> per-graph vertex values
        n_jobs: joblib worker count
    """
    parts = parse_descriptor(descriptor)
    per_graph = [
        {label: values[i] for label, values in tables.items()} if tables else None
        for i in range(len(graphs))
    ]
    diagrams = Parallel(n_jobs=n_jobs)(
        delayed(diagram_for_descriptor)(graph, parts, n_max, per_graph[i])
        for i, graph in enumerate(graphs)
    )
    logger.info("Computed %d diagrams for descriptor %s", len(diagrams), descriptor)
    return diagrams
