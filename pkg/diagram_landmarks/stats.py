"""
Per-class embedding statistics and closed-form descriptor selection.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.covariance import ledoit_wolf as sklearn_ledoit_wolf

from diagram_landmarks.config import SELECTION_RULES
from diagram_landmarks.errors import DataError, NumericGuardError

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 200
POWER_TOLERANCE = 1e-9
MAHALANOBIS_DIM_CAP = 4096


@dataclass(eq=False)
class ClassStats:
    """Class means, covariance summaries and separation statistics."""
    classes: Tuple[int, ...]
    means: np.ndarray
    counts: Tuple[int, ...]
    traces: Tuple[float, ...]
    op_norms: Tuple[float, ...]
    delta: float
    class_gaps: Tuple[float, ...]
    radius: float
    within_radii: Tuple[float, ...]
    centered: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def m_min(self) -> int:
        return min(self.counts)

    @property
    def stable_ranks(self) -> Tuple[Optional[float], ...]:
        """tr / op per class; None for a zero covariance."""
        return tuple(t / o if o > 0 else None for t, o in zip(self.traces, self.op_norms))


def operator_norm(centered: np.ndarray, seed: int = 0) -> float:
    """
    Largest eigenvalue of the (m - 1)-normalized covariance of centered rows.

    Power iteration on v -> X^T (X v) / (m - 1); the l x l matrix is never formed.
    """
    m, dim = centered.shape
    if m < 2 or not np.any(centered):
        return 0.0
    rng = np.random.default_rng(seed)
    vector = rng.standard_normal(dim)
    vector /= np.linalg.norm(vector)
    value = 0.0
    for _ in range(POWER_ITERATIONS):
        image = centered.T @ (centered @ vector) / (m - 1)
        new_value = float(np.linalg.norm(image))
        if new_value == 0.0:
            return 0.0
        vector = image / new_value
        if abs(new_value - value) <= POWER_TOLERANCE * new_value:
            value = new_value
            break
        value = new_value
    return value


def fit_class_stats(features: np.ndarray, labels: Sequence[int], keep_centered: bool = True) -> ClassStats:
    """
    Fit per-class means and covariance summaries.

    Args:
        features: (n, l) embedded corpus
        labels: Class label per row
        keep_centered: Keep the centered class blocks (needed for Mahalanobis)

    Returns:
        ClassStats: Fitted statistics, classes in ascending label order

    Raises:
        DataError: If fewer than two classes are present or shapes disagree
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2 or len(features) != len(labels):
        raise DataError("Features must be a 2-D array with one label per row")
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise DataError("At least two classes are required; class-mean separation is undefined")

    means, counts, traces, op_norms, within, blocks = [], [], [], [], [], []
    for c in classes:
        rows = features[labels == c]
        mean = rows.mean(axis=0)
        centered = rows - mean
        m = len(rows)
        if m < 2:
            logger.warning("Class %d has a single sample; its covariance is taken as zero", c)
        means.append(mean)
        counts.append(m)
        traces.append(float((centered ** 2).sum() / (m - 1)) if m > 1 else 0.0)
        op_norms.append(operator_norm(centered))
        within.append(float(np.linalg.norm(centered, axis=1).max()))
        blocks.append(centered)

    means = np.vstack(means)
    gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    class_gaps = tuple(float(g) for g in gaps.min(axis=1))

    stats = ClassStats(
        classes=classes,
        means=means,
        counts=tuple(counts),
        traces=tuple(traces),
        op_norms=tuple(op_norms),
        delta=min(class_gaps),
        class_gaps=class_gaps,
        radius=float(np.linalg.norm(features, axis=1).max()),
        within_radii=tuple(within),
        centered=tuple(blocks) if keep_centered else None,
    )
    logger.debug("Class stats: k=%d, delta=%.6g, radius=%.6g", stats.k, stats.delta, stats.radius)
    return stats


def eta(stats: ClassStats, dim: int) -> float:
    """Isotropic surrogate: delta / sqrt(dim)."""
    if dim < 1:
        raise ValueError(f"Dimension must be at least 1, got {dim}")
    return stats.delta / math.sqrt(dim)


@dataclass(eq=False)
class ShrunkCovariance:
    """Ledoit-Wolf shrunk covariance (1 - rho) S + rho mu I."""
    matrix: np.ndarray
    shrinkage: float
    mu: float


def ledoit_wolf(centered: np.ndarray, radius: float = 1.0) -> ShrunkCovariance:
    """
    Ledoit-Wolf shrinkage toward the scaled identity (tr(S)/l) I.

    Args:
        centered: (n, l) already-centered samples, n >= 2
        radius: Embedding radius, sets the floor used for a zero covariance

    Returns:
        ShrunkCovariance: The shrunk matrix, intensity and target scale

    Raises:
        NumericGuardError: If l exceeds the dense-matrix cap
    """
    centered = np.asarray(centered, dtype=float)
    n, dim = centered.shape
    if n < 2:
        raise ValueError("Ledoit-Wolf shrinkage needs at least two samples")
    if dim > MAHALANOBIS_DIM_CAP:
        logger.warning("Dimension %d exceeds the Mahalanobis cap %d", dim, MAHALANOBIS_DIM_CAP)
        raise NumericGuardError(
            f"Dimension {dim} exceeds {MAHALANOBIS_DIM_CAP}; use the eta or delta_over_r rule"
        )

    if not np.any(centered):
        epsilon = 1e-12 * max(1.0, radius ** 2)
        return ShrunkCovariance(matrix=epsilon * np.eye(dim), shrinkage=1.0, mu=0.0)

    matrix, shrinkage = sklearn_ledoit_wolf(centered, assume_centered=True)
    mu = float(np.trace(centered.T @ centered) / (n * dim))
    return ShrunkCovariance(matrix=matrix, shrinkage=float(shrinkage), mu=mu)


def pooled_centered(stats: ClassStats) -> np.ndarray:
    """Stack class-centered rows, reweighted so X^T X / n = (1/k) sum_c S_c with (m_c - 1)-normalized S_c."""
    if stats.centered is None:
        raise ValueError("Class stats were fitted without centered blocks")
    total = sum(stats.counts)
    rows = [
        block * math.sqrt(total / (stats.k * max(len(block) - 1, 1)))
        for block in stats.centered
    ]
    return np.vstack(rows)


def mahalanobis_margin(stats: ClassStats, shrunk: ShrunkCovariance) -> float:
    """
    Minimum over class pairs of sqrt((mu_c - mu_c')^T Sigma^-1 (mu_c - mu_c')).

    Raises:
        NumericGuardError: If the covariance is not positive definite
    """
    try:
        factor = cho_factor(shrunk.matrix, lower=True)
    except LinAlgError as e:
        logger.warning("Shrunk covariance is not positive definite: %s", e)
        raise NumericGuardError(f"Covariance is not positive definite: {e}") from e

    best = math.inf
    for i in range(stats.k):
        for j in range(i + 1, stats.k):
            diff = stats.means[i] - stats.means[j]
            best = min(best, math.sqrt(max(float(diff @ cho_solve(factor, diff)), 0.0)))
    return best


@dataclass
class DescriptorStats:
    """Selection statistics for one descriptor."""
    name: str
    dim: int
    delta: float
    radius: float
    eta: float
    delta_over_r: float
    mahalanobis: Optional[float]

    def value(self, rule: str) -> Optional[float]:
        return {"mah": self.mahalanobis, "delta_over_r": self.delta_over_r, "eta": self.eta}[rule]


@dataclass
class SelectionReport:
    """Per-descriptor statistics, rankings under each rule and the chosen descriptor."""
    rule: str
    rows: List[DescriptorStats]
    rankings: Dict[str, List[str]]
    chosen: str

    def rank_of(self, name: str, rule: str) -> int:
        """1-based rank of a descriptor under a rule."""
        return self.rankings[rule].index(name) + 1

    def to_rows(self) -> List[Tuple]:
        """Rows of the selection table, descriptors in name order."""
        return [
            (row.name, row.dim, row.delta, row.radius, row.eta, row.delta_over_r,
             row.mahalanobis if row.mahalanobis is not None else float('nan'),
             self.rank_of(row.name, "eta"), self.rank_of(row.name, "delta_over_r"),
             self.rank_of(row.name, "mah"))
            for row in self.rows
        ]


SELECTION_HEADER = ("descriptor", "dim", "delta", "radius", "eta", "delta_over_r",
                    "mahalanobis", "rank_eta", "rank_delta_over_r", "rank_mah")


def _rank(rows: List[DescriptorStats], rule: str) -> List[str]:
    """Descending by statistic, ties (and missing values, last) by name."""
    def key(row: DescriptorStats):
        value = row.value(rule)
        return (value is None, -(value if value is not None else 0.0), row.name)
    return [row.name for row in sorted(rows, key=key)]


def descriptor_stats(name: str, features: np.ndarray, labels: Sequence[int]) -> DescriptorStats:
    """Compute the three selection statistics for one embedded corpus."""
    stats = fit_class_stats(features, labels)
    dim = stats.dim
    mahalanobis = None
    if dim <= MAHALANOBIS_DIM_CAP:
        shrunk = ledoit_wolf(pooled_centered(stats), radius=stats.radius)
        mahalanobis = mahalanobis_margin(stats, shrunk)
    else:
        logger.info("Descriptor %s: dimension %d above the Mahalanobis cap", name, dim)
    return DescriptorStats(
        name=name,
        dim=dim,
        delta=stats.delta,
        radius=stats.radius,
        eta=eta(stats, dim),
        delta_over_r=stats.delta / stats.radius if stats.radius > 0 else 0.0,
        mahalanobis=mahalanobis,
    )


def select_descriptor(pool: Mapping[str, np.ndarray], labels: Sequence[int],
                      rule: str = "mah") -> SelectionReport:
    """
    Rank a pool of embedded corpora and pick the best descriptor under a rule.

    Args:
        pool: Descriptor name -> (n, l_f) embedded corpus, rows aligned with labels
        labels: Shared class labels
        rule: One of "mah", "delta_over_r", "eta"

    Returns:
        SelectionReport: Full statistics and rankings

    Raises:
        ValueError: On an empty pool or unknown rule
        NumericGuardError: If the rule is "mah" and a descriptor exceeds the dimension cap
    """
    if rule not in SELECTION_RULES:
        raise ValueError(f"Unknown selection rule: {rule}")
    if not pool:
        raise ValueError("Descriptor pool is empty")

    rows = [descriptor_stats(name, pool[name], labels) for name in sorted(pool)]
    if rule == "mah" and any(row.mahalanobis is None for row in rows):
        raise NumericGuardError(
            f"Mahalanobis margin unavailable above dimension {MAHALANOBIS_DIM_CAP}; "
            "use the eta or delta_over_r rule"
        )
    rankings = {r: _rank(rows, r) for r in SELECTION_RULES}
    chosen = rankings[rule][0]
    logger.info("Selected descriptor %s under rule %s", chosen, rule)
    return SelectionReport(rule=rule, rows=rows, rankings=rankings, chosen=chosen)


@dataclass
class RiskRate:
    """Rate term of the excess-risk bound and its sample-size hypothesis."""
    rate: float
    required_m: float
    hypothesis_holds: bool


def risk_rate(k: int, radius: float, delta: float, m_min: int, confidence: float = 0.05) -> RiskRate:
    """
    Rate term 8 (k - 1) R / (delta sqrt(m_min)).

    The hypothesis m_min >= 128 R^2 log(4k/confidence) / delta^2 is reported
    alongside.

    Raises:
        ValueError: If delta <= 0 or m_min < 1
    """
    if delta <= 0:
        raise ValueError(f"Class-mean separation must be positive, got {delta}")
    if m_min < 1:
        raise ValueError(f"m_min must be at least 1, got {m_min}")
    rate = 8.0 * (k - 1) * radius / (delta * math.sqrt(m_min))
    required = 128.0 * radius ** 2 * math.log(4 * k / confidence) / delta ** 2
    return RiskRate(rate=rate, required_m=required, hypothesis_holds=m_min >= required)


@dataclass
class Separability:
    """Sufficient condition for zero-error linear separation: D_max < delta / 2."""
    max_within_radius: float
    half_delta: float
    separable: bool
    margin: float


def linear_separability(stats: ClassStats) -> Separability:
    """Check D_max < delta / 2; the margin is delta / 2 - D_max."""
    d_max = max(stats.within_radii)
    half = stats.delta / 2.0
    return Separability(max_within_radius=d_max, half_delta=half,
                        separable=d_max < half, margin=half - d_max)
