"""
Readers for TU-format graph benchmarks and per-graph vertex-function tables.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from diagram_landmarks.errors import DataError
from diagram_landmarks.graphfilt import Graph

logger = logging.getLogger(__name__)

_SEPARATORS = re.compile(r"[,\s]+")


@dataclass
class TUDataset:
    """Graphs with class labels remapped to 0..k-1."""
    name: str
    graphs: List[Graph]
    labels: np.ndarray
    label_map: Dict[str, int]

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def n_classes(self) -> int:
        return len(self.label_map)


def _fields(line: str) -> List[str]:
    return [f for f in _SEPARATORS.split(line.strip()) if f]


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"not an integer: {text}")
        return int(value)


def _read_int_rows(path: Path, width: int) -> List[Tuple[int, List[int]]]:
    """(line number, values) for each non-blank line of an integer table."""
    if not path.exists():
        logger.error("Missing dataset file: %s", path)
        raise DataError(f"Missing dataset file: {path}")
    rows = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            fields = _fields(line)
            if not fields:
                continue
            try:
                values = [_parse_int(f) for f in fields]
            except ValueError as e:
                logger.error("Error parsing %s:%d: %r", path.name, number, line.rstrip())
                raise DataError(f"{path.name}:{number}: not an integer row") from e
            if len(values) != width:
                logger.error("Error parsing %s:%d: expected %d fields, got %d",
                             path.name, number, width, len(values))
                raise DataError(f"{path.name}:{number}: expected {width} fields, got {len(values)}")
            rows.append((number, values))
    return rows


def _detect_prefix(directory: Path) -> str:
    matches = sorted(directory.glob("*_A.txt"))
    if len(matches) != 1:
        raise DataError(f"Expected exactly one *_A.txt file in {directory}, found {len(matches)}")
    return matches[0].name[:-len("_A.txt")]


def load_tu_dataset(path: Union[str, Path]) -> TUDataset:
    """
    Load a TU benchmark directory.

    Args:
        path: Directory holding DS_A.txt (1-indexed edges), DS_graph_indicator.txt
            and DS_graph_labels.txt

    Returns:
        TUDataset: Graphs with vertices renumbered from 0 within each graph

    Raises:
        DataError: On missing files or inconsistent contents, with file:line detail
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"Dataset directory not found: {directory}")
    prefix = _detect_prefix(directory)

    indicator = [values[0] for _, values in _read_int_rows(directory / f"{prefix}_graph_indicator.txt", 1)]
    raw_labels = [values[0] for _, values in _read_int_rows(directory / f"{prefix}_graph_labels.txt", 1)]
    n_graphs = len(raw_labels)
    if not indicator:
        raise DataError(f"{prefix}_graph_indicator.txt is empty")
    if min(indicator) < 1 or max(indicator) > n_graphs:
        raise DataError(f"Graph indicator references graphs outside 1..{n_graphs}")

    # global vertex id (1-based) -> (graph index, local vertex id)
    local_ids: List[Tuple[int, int]] = []
    sizes = [0] * n_graphs
    for graph_id in indicator:
        local_ids.append((graph_id - 1, sizes[graph_id - 1]))
        sizes[graph_id - 1] += 1
    if 0 in sizes:
        raise DataError(f"Graph {sizes.index(0) + 1} has no vertices")

    edges: List[set] = [set() for _ in range(n_graphs)]
    for number, (u, v) in _read_int_rows(directory / f"{prefix}_A.txt", 2):
        if not (1 <= u <= len(local_ids) and 1 <= v <= len(local_ids)):
            logger.error("Error parsing %s_A.txt:%d: vertex out of range", prefix, number)
            raise DataError(f"{prefix}_A.txt:{number}: vertex id out of range")
        (gu, lu), (gv, lv) = local_ids[u - 1], local_ids[v - 1]
        if gu != gv:
            raise DataError(f"{prefix}_A.txt:{number}: edge joins graphs {gu + 1} and {gv + 1}")
        if lu != lv:
            edges[gu].add((min(lu, lv), max(lu, lv)))

    graphs = [Graph(sizes[g], tuple(sorted(edges[g]))) for g in range(n_graphs)]
    label_map = {str(raw): i for i, raw in enumerate(sorted(set(raw_labels)))}
    labels = np.array([label_map[str(raw)] for raw in raw_labels], dtype=int)
    dataset = TUDataset(name=prefix, graphs=graphs, labels=labels, label_map=label_map)
    logger.info("Loaded %s: %d graphs, %d classes", prefix, len(dataset), dataset.n_classes)
    return dataset


def load_vertex_function_table(path: Union[str, Path], graphs: List[Graph]) -> List[np.ndarray]:
    """
    Read one line of vertex values per graph, whitespace or comma separated.

    Raises:
        DataError: If the line count or a line's length disagrees with the graphs
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Vertex function table not found: {path}")
    tables = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            fields = _fields(line)
            if not fields:
                continue
            index = len(tables)
            if index >= len(graphs):
                raise DataError(f"{path.name}:{number}: more rows than graphs ({len(graphs)})")
            try:
                values = np.array([float(f) for f in fields])
            except ValueError as e:
                logger.error("Error parsing %s:%d: %r", path.name, number, line.rstrip())
                raise DataError(f"{path.name}:{number}: non-numeric value") from e
            if len(values) != graphs[index].n_vertices:
                raise DataError(
                    f"{path.name}:{number}: {len(values)} values for a graph of {graphs[index].n_vertices} vertices"
                )
            tables.append(values)
    if len(tables) != len(graphs):
        raise DataError(f"{path.name}: {len(tables)} rows for {len(graphs)} graphs")
    return tables
