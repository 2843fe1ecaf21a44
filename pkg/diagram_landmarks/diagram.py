"""
Persistence diagram data model, exact bottleneck distance and top-N filter.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiagramPoint:
    """A finite (birth, death) point with death > birth >= 0."""
    birth: float
    death: float

    def __post_init__(self):
        if not (np.isfinite(self.birth) and np.isfinite(self.death)):
            raise ValueError(f"Diagram point must be finite, got ({self.birth}, {self.death})")
        if self.birth < 0 or self.death <= self.birth:
            raise ValueError(
                f"Diagram point must satisfy death > birth >= 0, got ({self.birth}, {self.death})"
            )


class Diagonal:
    """The diagonal marker, matched against points sent to the diagonal."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIAGONAL"


DIAGONAL = Diagonal()

PointLike = Union[DiagramPoint, Diagonal]


@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite multiset of diagram points; multiplicity is repetition."""
    points: Tuple[DiagramPoint, ...] = field(default=())
    homology_dim: Optional[int] = field(default=None)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]],
                   homology_dim: Optional[int] = None) -> 'PersistenceDiagram':
        """Build a diagram from (birth, death) pairs."""
        return cls(tuple(DiagramPoint(float(b), float(d)) for b, d in pairs), homology_dim)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self) -> np.ndarray:
        """Return the points as an (n, 2) float array."""
        if not self.points:
            return np.zeros((0, 2))
        return np.array([(p.birth, p.death) for p in self.points], dtype=float)

    def union(self, other: 'PersistenceDiagram') -> 'PersistenceDiagram':
        """Multiset union; the homology tag survives only if both agree."""
        dim = self.homology_dim if self.homology_dim == other.homology_dim else None
        return PersistenceDiagram(self.points + other.points, dim)


def persistence(p: DiagramPoint) -> float:
    """Lifetime death - birth of a point."""
    return p.death - p.birth


def diag_cost(p: PointLike) -> float:
    """l-infinity distance from a point to the diagonal, (d - b) / 2."""
    if p is DIAGONAL:
        return 0.0
    return persistence(p) / 2.0


def d_inf(a: DiagramPoint, b: DiagramPoint) -> float:
    """l-infinity distance between two points of the plane."""
    return max(abs(a.birth - b.birth), abs(a.death - b.death))


def bottleneck_single(p: PointLike, q: PointLike) -> float:
    """Bottleneck distance between two single-point diagrams.

    Either argument may be DIAGONAL, the empty diagram.
    """
    if p is DIAGONAL or q is DIAGONAL:
        return max(diag_cost(p), diag_cost(q))
    return min(d_inf(p, q), max(diag_cost(p), diag_cost(q)))


def filter_top_n(diagram: PersistenceDiagram, n_max: int) -> PersistenceDiagram:
    """Keep the n_max most persistent points.

    Ties are broken by (birth, death) so the output is deterministic; the
    kept points are returned in that order.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    if len(diagram) <= n_max:
        return diagram
    ranked = sorted(diagram.points, key=lambda p: (-persistence(p), p.birth, p.death))
    return PersistenceDiagram(tuple(ranked[:n_max]), diagram.homology_dim)


def _cross_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise l-infinity distances between rows of two (n, 2) arrays."""
    return np.maximum(
        np.abs(a[:, None, 0] - b[None, :, 0]),
        np.abs(a[:, None, 1] - b[None, :, 1]),
    )


def _has_perfect_matching(cross: np.ndarray, diag_a: np.ndarray, diag_b: np.ndarray,
                          threshold: float) -> bool:
    """Feasibility of a matching of cost <= threshold.

    Left vertices are the n points of A followed by m diagonal slots (one per
    point of B); right vertices are the m points of B followed by n diagonal
    slots (one per point of A). Slot-to-slot edges always exist.
    """
    n, m = cross.shape
    rows, cols = [], []

    ai, bj = np.nonzero(cross <= threshold)
    rows.append(ai)
    cols.append(bj)

    near_a = np.nonzero(diag_a <= threshold)[0]
    rows.append(near_a)
    cols.append(m + near_a)

    near_b = np.nonzero(diag_b <= threshold)[0]
    rows.append(n + near_b)
    cols.append(near_b)

    slot_rows, slot_cols = np.meshgrid(np.arange(m), np.arange(n), indexing='ij')
    rows.append(n + slot_rows.ravel())
    cols.append(m + slot_cols.ravel())

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    size = n + m
    graph = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(size, size))
    matching = maximum_bipartite_matching(graph, perm_type='column')
    return bool(np.all(matching >= 0))


def bottleneck(a: PersistenceDiagram, b: PersistenceDiagram) -> float:
    """Exact bottleneck distance between two finite diagrams.

    Binary search over the sorted candidate costs (cross distances and
    diagonal costs), checking each threshold with a maximum bipartite
    matching. The result is always one of the candidate values.
    """
    pa = a.as_array()
    pb = b.as_array()
    diag_a = (pa[:, 1] - pa[:, 0]) / 2.0
    diag_b = (pb[:, 1] - pb[:, 0]) / 2.0
    if len(pa) == 0 and len(pb) == 0:
        return 0.0
    if len(pa) == 0:
        return float(diag_b.max())
    if len(pb) == 0:
        return float(diag_a.max())

    cross = _cross_distances(pa, pb)
    candidates = np.unique(np.concatenate([[0.0], cross.ravel(), diag_a, diag_b]))

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(cross, diag_a, diag_b, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1

    logger.debug("Bottleneck between %d and %d points: %s", len(pa), len(pb), candidates[lo])
    return float(candidates[lo])
