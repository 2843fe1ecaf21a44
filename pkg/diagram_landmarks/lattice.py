"""
Parity-constrained landmark grid at a single scale.

A grid at scale R and bound L holds the sites (mR, nR) with m odd >= 1,
n even >= 4, n >= m + 3 and nR <= L, ordered by (m, n), followed by the
diagonal landmark.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from diagram_landmarks.diagram import DIAGONAL, DiagramPoint, PointLike, d_inf, diag_cost

logger = logging.getLogger(__name__)

# Relative slack for float comparisons against lattice and ball boundaries
BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True)
class LandmarkGrid:
    """Landmarks at one scale; the diagonal landmark is always last."""
    scale: float
    bound: float
    indices: Tuple[Tuple[int, int], ...]

    @property
    def has_diagonal(self) -> bool:
        return True

    @property
    def size(self) -> int:
        """Number of landmarks M, diagonal included."""
        return len(self.indices) + 1

    @property
    def coordinates(self) -> np.ndarray:
        """(M - 1, 2) array of lattice site coordinates."""
        if not self.indices:
            return np.zeros((0, 2))
        return np.asarray(self.indices, dtype=float) * self.scale

    @property
    def landmarks(self) -> List[PointLike]:
        """Lattice sites as diagram points, then DIAGONAL."""
        sites: List[PointLike] = [DiagramPoint(m * self.scale, n * self.scale)
                                  for m, n in self.indices]
        sites.append(DIAGONAL)
        return sites

    def to_rows(self) -> List[Tuple[int, int, float, float]]:
        """(m, n, birth, death) rows for inspection tables."""
        return [(m, n, m * self.scale, n * self.scale) for m, n in self.indices]


def build_grid(scale: float, bound: float) -> LandmarkGrid:
    """
    Enumerate the landmark grid at one scale.

    Args:
        scale: Scale R > 0
        bound: Bound L >= R of the region [0, L]^2

    Returns:
        LandmarkGrid: Sites sorted by (m, n), plus the diagonal landmark

    Raises:
        ValueError: If R <= 0 or R > L
    """
    if scale <= 0:
        raise ValueError(f"Scale must be positive, got {scale}")
    if scale > bound:
        raise ValueError(f"Scale {scale} exceeds bound {bound}")

    n_top = int(np.floor(bound / scale * (1 + BOUNDARY_SLACK)))
    indices = [
        (m, n)
        for m in range(1, n_top + 1, 2)
        for n in range(4, n_top + 1, 2)
        if n >= m + 3
    ]
    logger.debug("Grid at R=%s, L=%s: %d lattice sites", scale, bound, len(indices))
    return LandmarkGrid(scale=float(scale), bound=float(bound), indices=tuple(indices))


def cover_multiplicity(grid: LandmarkGrid, x: DiagramPoint) -> int:
    """
    Count landmarks whose closed 3R/2 ball contains x.

    For a lattice site the ball is taken in the direct l-infinity branch of
    the bottleneck distance: its diagonal branch never drops below 3R/2, so
    it can only touch the boundary where the hat coordinate vanishes.

    Raises:
        ValueError: If x lies outside 0 <= b < d <= L
    """
    if x.birth < 0 or x.death > grid.bound * (1 + BOUNDARY_SLACK):
        raise ValueError(f"Point ({x.birth}, {x.death}) lies outside the region of bound {grid.bound}")

    radius = 1.5 * grid.scale * (1 + BOUNDARY_SLACK)
    count = int(diag_cost(x) <= radius)
    for site in grid.landmarks[:-1]:
        if d_inf(site, x) <= radius:
            count += 1
    return count
