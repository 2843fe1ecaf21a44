"""Shared fixtures."""
from pathlib import Path
from typing import List

import numpy as np
import pytest

from diagram_landmarks.diagram import PersistenceDiagram


def random_diagram(rng: np.random.Generator, max_points: int, bound: float = 10.0,
                   min_points: int = 0) -> PersistenceDiagram:
    """Diagram with uniformly drawn points in 0 <= b < d <= bound."""
    size = int(rng.integers(min_points, max_points + 1))
    pairs = []
    for _ in range(size):
        b, d = sorted(rng.uniform(0.0, bound, size=2))
        if d - b < 1e-6:
            d = b + 1e-3
        pairs.append((b, min(d, bound)))
    return PersistenceDiagram.from_pairs(pairs)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def diagram_factory(rng):
    """Callable producing random diagrams from the shared generator."""
    def make(max_points: int = 4, bound: float = 10.0, min_points: int = 0) -> PersistenceDiagram:
        return random_diagram(rng, max_points, bound, min_points)
    return make


def write_tu_dataset(directory: Path, name: str, graphs: List[List[tuple]], sizes: List[int],
                     labels: List[int]) -> Path:
    """Write graphs (local 0-based edges) in TU layout under directory/name."""
    root = directory / name
    root.mkdir(parents=True, exist_ok=True)
    offset = 0
    edge_lines, indicator_lines = [], []
    for g, (edges, size) in enumerate(zip(graphs, sizes), start=1):
        indicator_lines.extend([str(g)] * size)
        for u, v in edges:
            edge_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            edge_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        offset += size
    (root / f"{name}_A.txt").write_text("\n".join(edge_lines) + "\n")
    (root / f"{name}_graph_indicator.txt").write_text("\n".join(indicator_lines) + "\n")
    (root / f"{name}_graph_labels.txt").write_text("\n".join(str(y) for y in labels) + "\n")
    return root


@pytest.fixture
def triangle_dataset(tmp_path) -> Path:
    """Two triangles labeled 1 and 2."""
    triangle = [(0, 1), (1, 2), (0, 2)]
    return write_tu_dataset(tmp_path, "TRI", [triangle, triangle], [3, 3], [1, 2])


@pytest.fixture
def toy_dataset(tmp_path) -> Path:
    """Twelve small graphs: paths (label 0) and stars with a pendant cycle (label 1)."""
    graphs, sizes, labels = [], [], []
    for n in range(4, 10):
        graphs.append([(i, i + 1) for i in range(n - 1)])
        sizes.append(n)
        labels.append(0)
    for n in range(4, 10):
        edges = [(0, i) for i in range(1, n)] + [(1, 2)]
        graphs.append(edges)
        sizes.append(n)
        labels.append(1)
    return write_tu_dataset(tmp_path, "TOY", graphs, sizes, labels)
