"""
Hat coordinates and the multiscale landmark embedding.

A scale configuration holds scales R_1 < ... < R_N <= L with weights
sum(w_k^2) = 1. Block k of the embedding is w_k * 2^(-3/2) times the
single-scale summation embedding at R_k.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from diagram_landmarks.diagram import (
    PersistenceDiagram,
    PointLike,
    bottleneck,
    bottleneck_single,
)
from diagram_landmarks.errors import DataError
from diagram_landmarks.lattice import LandmarkGrid, build_grid

logger = logging.getLogger(__name__)

BLOCK_NORMALIZATION = 2.0 ** -1.5
WEIGHT_TOLERANCE = 1e-12
BOUND_HEADROOM = 1.05


@dataclass(frozen=True)
class ScaleConfig:
    """Ordered scales, their weights and the bound L, with one grid per scale."""
    scales: Tuple[float, ...]
    weights: Tuple[float, ...]
    bound: float
    grids: Tuple[LandmarkGrid, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.scales:
            raise ValueError("At least one scale is required")
        if len(self.weights) != len(self.scales):
            raise ValueError("Scales and weights must have the same length")
        if any(r <= 0 for r in self.scales):
            raise ValueError("Scales must be positive")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError(f"Scales must be strictly increasing, got {self.scales}")
        if self.scales[-1] > self.bound:
            raise ValueError(f"Largest scale {self.scales[-1]} exceeds bound {self.bound}")
        if self.bound <= self.scales[0]:
            raise ValueError(f"Bound {self.bound} must exceed the smallest scale {self.scales[0]}")
        if any(w < 0 for w in self.weights):
            raise ValueError("Weights must be non-negative")
        if abs(sum(w * w for w in self.weights) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("Squared weights must sum to 1")
        if not self.grids:
            object.__setattr__(self, 'grids', tuple(build_grid(r, self.bound) for r in self.scales))
        elif tuple(g.scale for g in self.grids) != tuple(self.scales):
            raise ValueError("Grids do not match the scales")

    @property
    def n_scales(self) -> int:
        return len(self.scales)

    @property
    def block_sizes(self) -> Tuple[int, ...]:
        return tuple(g.size for g in self.grids)

    @property
    def total_dim(self) -> int:
        """Embedding dimension, the sum of grid sizes."""
        return sum(self.block_sizes)

    def block_slices(self) -> List[slice]:
        """Slices of each scale block inside the flat embedding."""
        offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        return [slice(int(lo), int(hi)) for lo, hi in zip(offsets[:-1], offsets[1:])]

    def to_record(self) -> Dict[str, Any]:
        """Serializable record shared by train and predict runs."""
        return {
            "scales": list(self.scales),
            "weights": list(self.weights),
            "bound": self.bound,
            "total_dim": self.total_dim,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> 'ScaleConfig':
        """Rebuild a configuration (and its grids) from a record."""
        config = cls(
            scales=tuple(float(r) for r in record["scales"]),
            weights=tuple(float(w) for w in record["weights"]),
            bound=float(record["bound"]),
        )
        if "total_dim" in record and int(record["total_dim"]) != config.total_dim:
            raise DataError(
                f"Scale record declares dimension {record['total_dim']}, grids give {config.total_dim}"
            )
        return config


@dataclass(frozen=True, eq=False)
class EmbeddedVector:
    """Embedded diagram, one dense block per scale."""
    blocks: Tuple[np.ndarray, ...]

    @property
    def total_dim(self) -> int:
        return sum(len(b) for b in self.blocks)

    def as_array(self) -> np.ndarray:
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0)

    @property
    def nnz(self) -> int:
        return int(sum(np.count_nonzero(b) for b in self.blocks))


def hat(scale: float, landmark: PointLike, x: PointLike) -> float:
    """Hat coordinate max(3R/2 - d_B(p, x), 0)."""
    if scale <= 0:
        raise ValueError(f"Scale must be positive, got {scale}")
    return max(1.5 * scale - bottleneck_single(landmark, x), 0.0)


def embed_single_scale(diagram: PersistenceDiagram, grid: LandmarkGrid,
                       cardinality: Optional[int] = None) -> np.ndarray:
    """
    Single-scale summation embedding: coordinate p is sum over a in A of hat(R, p, a).

    Args:
        diagram: Diagram to embed
        grid: Landmark grid at scale R
        cardinality: If given, the diagram is padded with diagonal points up
            to this size; padding only adds to the diagonal coordinate.

    Returns:
        np.ndarray: Coordinates in grid order, diagonal last
    """
    points = diagram.as_array()
    height = 1.5 * grid.scale
    coords = np.zeros(grid.size)

    if len(points):
        sites = grid.coordinates
        diag_x = (points[:, 1] - points[:, 0]) / 2.0
        if len(sites):
            diag_p = (sites[:, 1] - sites[:, 0]) / 2.0
            direct = np.maximum(
                np.abs(points[:, None, 0] - sites[None, :, 0]),
                np.abs(points[:, None, 1] - sites[None, :, 1]),
            )
            via_diagonal = np.maximum(diag_x[:, None], diag_p[None, :])
            distance = np.minimum(direct, via_diagonal)
            coords[:-1] = np.maximum(height - distance, 0.0).sum(axis=0)
        coords[-1] = np.maximum(height - diag_x, 0.0).sum()

    if cardinality is not None:
        if cardinality < len(points):
            raise ValueError(f"Cardinality {cardinality} is below the diagram size {len(points)}")
        coords[-1] += (cardinality - len(points)) * height
    return coords


def embed(diagram: PersistenceDiagram, config: ScaleConfig,
          cardinality: Optional[int] = None) -> EmbeddedVector:
    """
    Multiscale landmark embedding.

    Raises:
        DataError: If the diagram is nonempty and no point lies in [0, L]^2
    """
    if len(diagram):
        deaths = diagram.as_array()[:, 1]
        if np.all(deaths > config.bound):
            raise DataError(
                f"Every point of the diagram lies outside [0, {config.bound}]^2"
            )
    blocks = tuple(
        w * BLOCK_NORMALIZATION * embed_single_scale(diagram, grid, cardinality)
        for w, grid in zip(config.weights, config.grids)
    )
    return EmbeddedVector(blocks)


def embed_corpus(diagrams: Sequence[PersistenceDiagram], config: ScaleConfig,
                 cardinality: Optional[int] = None) -> np.ndarray:
    """
    Embed diagrams into the rows of an (n, total_dim) matrix.

    With a cardinality every diagram is padded with diagonal points up to it,
    which puts diagrams of unequal size on the same footing for the
    stability bound.
    """
    matrix = np.zeros((len(diagrams), config.total_dim))
    for i, diagram in enumerate(diagrams):
        matrix[i] = embed(diagram, config, cardinality).as_array()
    logger.debug("Embedded %d diagrams into dimension %d", len(diagrams), config.total_dim)
    return matrix


def closed_form_weights(scales: Sequence[float], bound: float) -> Tuple[float, ...]:
    """
    Equimarginal scale weights.

    w_k^2 is proportional to (d_{k+1}^2 - d_k^2) / R_k^2 with d_i = R_i - R_1
    and d_{N+1} = L - R_1, normalized so the squares sum to one. A single
    scale always gets weight 1.

    Raises:
        ValueError: On non-increasing scales, R_N > L or L <= R_1 (N >= 2)
    """
    scales = [float(r) for r in scales]
    if not scales:
        raise ValueError("At least one scale is required")
    if any(r <= 0 for r in scales):
        raise ValueError("Scales must be positive")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError(f"Scales must be strictly increasing, got {scales}")
    if scales[-1] > bound:
        raise ValueError(f"Largest scale {scales[-1]} exceeds bound {bound}")
    if len(scales) == 1:
        return (1.0,)
    if bound <= scales[0]:
        raise ValueError(f"Bound {bound} must exceed the smallest scale {scales[0]}")

    offsets = [r - scales[0] for r in scales] + [bound - scales[0]]
    raw = np.array([
        (offsets[k + 1] ** 2 - offsets[k] ** 2) / scales[k] ** 2
        for k in range(len(scales))
    ])
    squared = raw / raw.sum()
    return tuple(float(w) for w in np.sqrt(squared))


def slope_ratios(config: ScaleConfig) -> Tuple[float, ...]:
    """The N ratios whose minimum, over 48, is the affine slope."""
    r = np.asarray(config.scales)
    w = np.asarray(config.weights)
    cumulative = np.cumsum(w ** 2 * r ** 2)
    ratios = [
        math.sqrt(cumulative[i - 1]) / (r[i] - r[0])
        for i in range(1, len(r))
    ]
    ratios.append(math.sqrt(cumulative[-1]) / (config.bound - r[0]))
    return tuple(ratios)


def lambda_slope(config: ScaleConfig) -> float:
    """Slope of the affine lower distortion bound through (R_1, 0)."""
    return min(slope_ratios(config)) / 48.0


def active_scales(config: ScaleConfig, distance: float) -> List[int]:
    """Indices k with 3 R_k <= distance, counting boundary ties as active."""
    slack = 1e-12 * max(1.0, abs(distance))
    return [k for k, r in enumerate(config.scales) if 3.0 * r <= distance + slack]


def step_floor(config: ScaleConfig, distance: float) -> float:
    """(1/16) sqrt(sum over active scales of w_k^2 R_k^2)."""
    if distance < 0:
        raise ValueError(f"Distance must be non-negative, got {distance}")
    total = sum(config.weights[k] ** 2 * config.scales[k] ** 2
                for k in active_scales(config, distance))
    return math.sqrt(total) / 16.0


def tau_proxy(diagrams: Sequence[PersistenceDiagram]) -> float:
    """Median half-persistence over all points of all diagrams.

    Raises:
        DataError: If the diagrams hold no points
    """
    halves = [
        (p.death - p.birth) / 2.0
        for diagram in diagrams
        for p in diagram.points
    ]
    if not halves:
        raise DataError("Cannot estimate a scale center from an empty pool of points")
    return float(np.median(halves))


def cross_class_pairs(labels: Sequence[int], n_pairs: int, seed: int) -> List[Tuple[int, int]]:
    """
    Sample cross-class index pairs uniformly without replacement.

    All pairs are returned (in index order) when n_pairs covers them.

    Raises:
        DataError: If fewer than two classes are present
    """
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise DataError("At least two classes are required for cross-class pairs")
    first, second = np.nonzero(labels[:, None] != labels[None, :])
    keep = first < second
    pairs = np.stack([first[keep], second[keep]], axis=1)
    if n_pairs < len(pairs):
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(pairs), size=n_pairs, replace=False))
        pairs = pairs[chosen]
    return [(int(i), int(j)) for i, j in pairs]


def tau_crossing(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int],
                 n_pairs: int = 200, seed: int = 0) -> float:
    """Median bottleneck distance over sampled cross-class pairs."""
    pairs = cross_class_pairs(labels, n_pairs, seed)
    distances = [bottleneck(diagrams[i], diagrams[j]) for i, j in pairs]
    logger.debug("Crossing scale center from %d pairs", len(distances))
    return float(np.median(distances))


def auto_bound(diagrams: Sequence[PersistenceDiagram]) -> float:
    """Bound L: largest death over the pool with 5% headroom.

    Raises:
        DataError: If the diagrams hold no points
    """
    deaths = [p.death for diagram in diagrams for p in diagram.points]
    if not deaths:
        raise DataError("Cannot detect a bound from an empty pool of points")
    return BOUND_HEADROOM * max(deaths)


def scale_ladder(tau_star: float, n_scales: int, bound: float) -> Tuple[float, ...]:
    """Geometric ladder R_k = tau* 2^(k - ceil(N/2)), k = 1..N.

    If the top rung exceeds L/4 (so that its grid would hold no lattice
    site) the whole ladder is rescaled to put it at L/4.
    """
    center = math.ceil(n_scales / 2)
    ladder = [tau_star * 2.0 ** (k - center) for k in range(1, n_scales + 1)]
    ceiling = bound / 4.0
    if ladder[-1] > ceiling:
        factor = ceiling / ladder[-1]
        logger.info("Scale ladder rescaled by %.6g to keep R_N <= L/4", factor)
        ladder = [r * factor for r in ladder]
    return tuple(ladder)


def make_scale_config(tau_star: float, n_scales: int, bound: float) -> ScaleConfig:
    """
    Scale configuration centered on tau* with closed-form weights.

    Raises:
        ValueError: If tau* <= 0, N < 1 or tau* >= L
    """
    if tau_star <= 0:
        raise ValueError(f"Scale center must be positive, got {tau_star}")
    if n_scales < 1:
        raise ValueError(f"Number of scales must be at least 1, got {n_scales}")
    if tau_star >= bound:
        raise ValueError(f"Scale center {tau_star} must be below the bound {bound}")

    scales = scale_ladder(tau_star, n_scales, bound)
    weights = closed_form_weights(scales, bound)
    config = ScaleConfig(scales=scales, weights=weights, bound=float(bound))
    logger.info("Scale configuration: scales=%s, dimension=%d", scales, config.total_dim)
    return config
