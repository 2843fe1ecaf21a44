"""
Coherence audit, certificate-bound audit and the separation bridge diagnostic.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from diagram_landmarks.diagram import PersistenceDiagram, bottleneck
from diagram_landmarks.embedding import (
    BLOCK_NORMALIZATION,
    ScaleConfig,
    active_scales,
    cross_class_pairs,
    embed_single_scale,
    lambda_slope,
    step_floor,
)
from diagram_landmarks.stats import ClassStats

logger = logging.getLogger(__name__)

FLOOR_SLACK = 1e-9


@dataclass
class ScaleCheck:
    """Floor check of one active scale on unweighted blocks."""
    index: int
    scale: float
    block_norm_sq: float
    floor: float

    @property
    def passes(self) -> bool:
        return self.block_norm_sq >= self.floor * (1 - FLOOR_SLACK)


@dataclass
class CoherenceCheck:
    """Outcome of the coherence test for one pair; non-qualifying pairs are vacuously coherent."""
    distance: float
    qualifying: bool
    per_scale: List[ScaleCheck] = field(default_factory=list)

    @property
    def coherent(self) -> bool:
        return all(check.passes for check in self.per_scale)


def _coherence_from_blocks(blocks_a: Sequence[np.ndarray], blocks_b: Sequence[np.ndarray],
                           config: ScaleConfig, distance: float) -> CoherenceCheck:
    active = active_scales(config, distance)
    checks = [
        ScaleCheck(
            index=k,
            scale=config.scales[k],
            block_norm_sq=float(np.sum((blocks_a[k] - blocks_b[k]) ** 2)),
            floor=config.scales[k] ** 2 / 32.0,
        )
        for k in active
    ]
    return CoherenceCheck(distance=distance, qualifying=bool(active), per_scale=checks)


def _unweighted_blocks(diagram: PersistenceDiagram, config: ScaleConfig,
                       cardinality: Optional[int] = None) -> List[np.ndarray]:
    return [embed_single_scale(diagram, grid, cardinality) for grid in config.grids]


def _weighted_gap(blocks_a: Sequence[np.ndarray], blocks_b: Sequence[np.ndarray],
                  config: ScaleConfig) -> float:
    """||Phi(A) - Phi(B)|| assembled from unweighted blocks."""
    total = sum(
        (w * BLOCK_NORMALIZATION) ** 2 * float(np.sum((a - b) ** 2))
        for w, a, b in zip(config.weights, blocks_a, blocks_b)
    )
    return math.sqrt(total)


def is_nu_coherent(a: PersistenceDiagram, b: PersistenceDiagram, config: ScaleConfig,
                   distance: Optional[float] = None,
                   cardinality: Optional[int] = None) -> CoherenceCheck:
    """
    Check the per-scale floor ||Phi_Rk(A) - Phi_Rk(B)||^2 >= R_k^2 / 32 at every
    scale with 3 R_k <= d_B(A, B).

    Args:
        a: First diagram
        b: Second diagram
        config: Scale configuration
        distance: Precomputed bottleneck distance, computed when omitted
        cardinality: Pad both diagrams to this size before embedding

    Returns:
        CoherenceCheck: Per-scale detail; qualifying is False when no scale is active
    """
    if distance is None:
        distance = bottleneck(a, b)
    return _coherence_from_blocks(_unweighted_blocks(a, config, cardinality),
                                  _unweighted_blocks(b, config, cardinality), config, distance)


@dataclass
class PairAudit:
    """Audit record of one sampled cross-class pair."""
    first: int
    second: int
    distance: float
    qualifying: bool
    coherent: bool
    gap: float
    floor: float
    checks: List[ScaleCheck] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.gap / self.floor if self.floor > 0 else math.inf


@dataclass
class CoherenceReport:
    """How often sampled cross-class pairs clear the per-scale floor, and where they fail."""
    n_pairs_sampled: int
    n_qualifying: int
    n_coherent: int
    coherent_fraction: float
    weakest_scale: Optional[int]
    min_scale_pass_fraction: Optional[float]
    seed: int
    scale_pass_fractions: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


COHERENCE_HEADER = ("n_pairs_sampled", "n_qualifying", "n_coherent", "coherent_fraction",
                    "weakest_scale", "min_scale_pass_fraction", "seed")


@dataclass
class BoundReport:
    """How the weighted gap compares with step_floor(d_B) on qualifying pairs."""
    n_qualifying: int
    bound_fraction: float
    ratio_min: Optional[float]
    ratio_p25: Optional[float]
    ratio_p50: Optional[float]
    ratio_p75: Optional[float]
    coherent_violations: int
    seed: int

    def to_dict(self) -> Dict:
        return asdict(self)


BOUND_HEADER = ("n_qualifying", "bound_fraction", "ratio_min", "ratio_p25", "ratio_p50",
                "ratio_p75", "coherent_violations", "seed")


def _pair_distances(diagrams: Sequence[PersistenceDiagram], pairs: Sequence[Tuple[int, int]],
                    n_jobs: int) -> List[float]:
    return Parallel(n_jobs=n_jobs)(
        delayed(bottleneck)(diagrams[i], diagrams[j]) for i, j in pairs
    )


def audit_pairs(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int], config: ScaleConfig,
                n_pairs: int = 2000, seed: int = 0, n_jobs: int = 1,
                cardinality: Optional[int] = None) -> List[PairAudit]:
    """
    Sample cross-class pairs and evaluate coherence and the certificate ratio of each.

    Raises:
        DataError: If fewer than two classes are present
    """
    pairs = cross_class_pairs(labels, n_pairs, seed)
    distances = _pair_distances(diagrams, pairs, n_jobs)
    blocks: Dict[int, List[np.ndarray]] = {}

    def blocks_of(index: int) -> List[np.ndarray]:
        if index not in blocks:
            blocks[index] = _unweighted_blocks(diagrams[index], config, cardinality)
        return blocks[index]

    records = []
    for (i, j), distance in zip(pairs, distances):
        check = _coherence_from_blocks(blocks_of(i), blocks_of(j), config, distance)
        gap = _weighted_gap(blocks_of(i), blocks_of(j), config) if check.qualifying else 0.0
        records.append(PairAudit(
            first=i, second=j, distance=float(distance), qualifying=check.qualifying,
            coherent=check.coherent, gap=gap, floor=step_floor(config, distance),
            checks=check.per_scale,
        ))
    logger.info("Audited %d cross-class pairs, %d qualifying",
                len(records), sum(r.qualifying for r in records))
    return records


def summarize_coherence(records: Sequence[PairAudit], seed: int) -> CoherenceReport:
    """Coherent fraction over qualifying pairs and the pass rate of each active scale."""
    qualifying = [r for r in records if r.qualifying]
    passes: Dict[int, List[bool]] = {}
    for record in qualifying:
        for check in record.checks:
            passes.setdefault(check.index, []).append(check.passes)
    fractions = {k: float(np.mean(v)) for k, v in sorted(passes.items())}
    weakest = min(fractions, key=lambda k: (fractions[k], k)) if fractions else None
    n_coherent = sum(r.coherent for r in qualifying)
    return CoherenceReport(
        n_pairs_sampled=len(records),
        n_qualifying=len(qualifying),
        n_coherent=n_coherent,
        coherent_fraction=n_coherent / len(qualifying) if qualifying else 0.0,
        weakest_scale=weakest,
        min_scale_pass_fraction=fractions[weakest] if fractions else None,
        seed=seed,
        scale_pass_fractions=fractions,
    )


def summarize_bound(records: Sequence[PairAudit], seed: int) -> BoundReport:
    """Bound fraction and ratio percentiles over the qualifying pairs."""
    qualifying = [r for r in records if r.qualifying]
    if not qualifying:
        logger.warning("No sampled pair reaches the smallest active distance")
        return BoundReport(n_qualifying=0, bound_fraction=0.0, ratio_min=None, ratio_p25=None,
                           ratio_p50=None, ratio_p75=None, coherent_violations=0, seed=seed)

    ratios = np.array([r.ratio for r in qualifying])
    holds = ratios >= 1.0 - FLOOR_SLACK
    violations = sum(1 for r, ok in zip(qualifying, holds) if r.coherent and not ok)
    if violations:
        logger.warning("%d coherent pairs fall below the certificate floor", violations)
    p25, p50, p75 = np.percentile(ratios, [25, 50, 75])
    return BoundReport(
        n_qualifying=len(qualifying),
        bound_fraction=float(np.mean(holds)),
        ratio_min=float(ratios.min()),
        ratio_p25=float(p25),
        ratio_p50=float(p50),
        ratio_p75=float(p75),
        coherent_violations=violations,
        seed=seed,
    )


def audit_coherence(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int], config: ScaleConfig,
                    n_pairs: int = 2000, seed: int = 0, n_jobs: int = 1,
                    cardinality: Optional[int] = None) -> CoherenceReport:
    """Fraction of qualifying sampled cross-class pairs that are coherent."""
    records = audit_pairs(diagrams, labels, config, n_pairs, seed, n_jobs, cardinality)
    return summarize_coherence(records, seed)


def audit_certificate_bound(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int],
                            config: ScaleConfig, n_pairs: int = 2000, seed: int = 0,
                            n_jobs: int = 1, cardinality: Optional[int] = None) -> BoundReport:
    """Fraction of qualifying pairs with ||Phi(A) - Phi(B)|| >= step_floor(d_B), with ratio percentiles."""
    records = audit_pairs(diagrams, labels, config, n_pairs, seed, n_jobs, cardinality)
    return summarize_bound(records, seed)


@dataclass
class BridgeReport:
    """Lower bounds on Delta implied by the smallest sampled cross-class distance."""
    delta_star: float
    delta: float
    max_within_radius: float
    affine_bound: float
    step_bound: float
    affine_holds: bool
    step_holds: bool

    def to_dict(self) -> Dict:
        return asdict(self)


def lambda_bridge(distances: Sequence[float], config: ScaleConfig, stats: ClassStats) -> BridgeReport:
    """
    Compare Delta with lambda (delta* - R_1) - 2 max_c D_c and its step form.

    Args:
        distances: Bottleneck distances of sampled cross-class pairs; their
            minimum is an upper estimate of the support separation delta*
        config: Scale configuration of the embedding
        stats: Class statistics of the embedded corpus

    Returns:
        BridgeReport: Both bounds and whether Delta respects them
    """
    if not len(distances):
        raise ValueError("No cross-class distances supplied")
    delta_star = float(min(distances))
    spread = 2.0 * max(stats.within_radii)
    affine = lambda_slope(config) * (delta_star - config.scales[0]) - spread
    step = step_floor(config, delta_star) - spread
    return BridgeReport(
        delta_star=delta_star,
        delta=stats.delta,
        max_within_radius=max(stats.within_radii),
        affine_bound=affine,
        step_bound=step,
        affine_holds=stats.delta >= affine - FLOOR_SLACK,
        step_holds=stats.delta >= step - FLOOR_SLACK,
    )
