"""
Nearest-centroid prediction with certificate radii, firing verdicts and
per-class sample thresholds.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import chi2

from diagram_landmarks.errors import NumericGuardError
from diagram_landmarks.stats import ClassStats

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05


def nc_predict(x: np.ndarray, stats: ClassStats) -> int:
    """
    Nearest-centroid label of one embedded vector.

    Ties go to the smaller label (classes are stored in ascending order).

    Raises:
        ValueError: If stats hold no centroids or the dimension differs
    """
    return int(nc_predict_batch(np.asarray(x, dtype=float)[None, :], stats)[0])


def nc_predict_batch(features: np.ndarray, stats: ClassStats) -> np.ndarray:
    """Nearest-centroid labels for every row of features."""
    if stats.means is None or len(stats.means) == 0:
        raise ValueError("Class stats are not fitted")
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != stats.dim:
        raise ValueError(f"Expected rows of dimension {stats.dim}, got shape {features.shape}")
    distances = np.linalg.norm(features[:, None, :] - stats.means[None, :, :], axis=2)
    return np.asarray(stats.classes)[np.argmin(distances, axis=1)]


def _log_term(k: int, alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return math.log(2 * k / alpha)


def radius_pinelis(radius: float, m_min: int, k: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Hilbert-space Hoeffding radius 2R sqrt(2 log(2k/alpha) / m)."""
    if m_min < 1:
        raise ValueError(f"m_min must be at least 1, got {m_min}")
    return 2.0 * radius * math.sqrt(2.0 * _log_term(k, alpha) / m_min)


def radius_bernstein(trace: float, m_c: int, k: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Variance-aware radius sqrt(2 tr(Sigma_c) log(2k/alpha) / m_c)."""
    if m_c < 1:
        raise ValueError(f"m_c must be at least 1, got {m_c}")
    if trace < 0:
        raise ValueError(f"Covariance trace must be non-negative, got {trace}")
    return math.sqrt(2.0 * trace * _log_term(k, alpha) / m_c)


def chi2_quantile(dim: int, p: float) -> float:
    """Lower-tail p quantile of the chi-squared law with dim degrees of freedom."""
    if dim < 1:
        raise ValueError(f"Degrees of freedom must be at least 1, got {dim}")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(chi2.ppf(p, dim))


def radius_gaussian(op_norm: float, m_c: int, dim: int, k: int,
                    alpha: float = DEFAULT_ALPHA) -> float:
    """Gaussian plug-in radius sqrt(||Sigma_c||_op chi2_{dim, 1 - alpha/k} / m_c)."""
    if m_c < 1:
        raise ValueError(f"m_c must be at least 1, got {m_c}")
    return math.sqrt(op_norm * chi2_quantile(dim, 1.0 - alpha / k) / m_c)


@dataclass
class SampleThresholds:
    """Per-class sample sizes at which each radius drops below Delta_c / 2."""
    pinelis: int
    bernstein: int
    gaussian: int


def class_sample_thresholds(radius: float, op_norm: float, class_gap: float, dim: int,
                            k: int, alpha: float = DEFAULT_ALPHA) -> SampleThresholds:
    """
    Threshold triple for one class.

    Args:
        radius: Embedding radius R
        op_norm: ||Sigma_c||_op
        class_gap: Delta_c
        dim: Embedding dimension
        k: Number of classes
        alpha: Confidence level

    Returns:
        SampleThresholds: ceil(32 R^2 L / D^2), ceil(8 op L / D^2), ceil(4 op q / D^2)
        with L = log(2k/alpha) and q the 1 - alpha/k chi-squared quantile

    Raises:
        NumericGuardError: If Delta_c is zero
    """
    if class_gap <= 0:
        logger.warning("Class gap is %s; sample thresholds are unbounded", class_gap)
        raise NumericGuardError("Sample thresholds require a positive class gap")
    log_term = _log_term(k, alpha)
    gap_sq = class_gap ** 2
    return SampleThresholds(
        pinelis=math.ceil(32.0 * radius ** 2 * log_term / gap_sq),
        bernstein=math.ceil(8.0 * op_norm * log_term / gap_sq),
        gaussian=math.ceil(4.0 * op_norm * chi2_quantile(dim, 1.0 - alpha / k) / gap_sq),
    )


def sample_thresholds(stats: ClassStats, alpha: float = DEFAULT_ALPHA) -> Dict[int, SampleThresholds]:
    """Threshold triples keyed by class label."""
    return {
        c: class_sample_thresholds(stats.radius, op, gap, stats.dim, stats.k, alpha)
        for c, op, gap in zip(stats.classes, stats.op_norms, stats.class_gaps)
    }


@dataclass
class ClassCertificate:
    """Per-class statistics and the variance-aware radius of one class."""
    label: int
    count: int
    class_gap: float
    trace: float
    op_norm: float
    stable_rank: Optional[float]
    within_radius: float
    r_bernstein: float
    r_gaussian: float
    bernstein_in_regime: bool
    thresholds: Optional[SampleThresholds]


@dataclass
class CertificateReport:
    """Radii, verdicts and thresholds of one fit."""
    alpha: float
    k: int
    dim: int
    delta: float
    radius: float
    m_min: int
    r_pinelis: float
    r_bernstein: float
    r_gaussian: float
    fire_pinelis: bool
    fire_bernstein: bool
    fire_gaussian: bool
    vp_in_regime: bool
    classify_pinelis: bool
    classify_bernstein: bool
    classify_gaussian: bool
    classes: List[ClassCertificate]

    @property
    def half_delta(self) -> float:
        return self.delta / 2.0

    def to_dict(self) -> Dict:
        """Flat, JSON-ready record."""
        return asdict(self)


def _classifies(stats: ClassStats, radii: Tuple[float, ...]) -> bool:
    """D_c < Delta/2 - r_c for every class."""
    half = stats.delta / 2.0
    return all(d < half - r for d, r in zip(stats.within_radii, radii))


def certify(stats: ClassStats, alpha: float = DEFAULT_ALPHA) -> CertificateReport:
    """
    Evaluate the three certificate radii on fitted class statistics.

    Hoeffding-type and Gaussian radii are compared with Delta/2; the
    variance-aware radius fires only if r_c < Delta_c / 2 and
    r_c <= tr(Sigma_c) / R for every class; outside that regime it never fires.

    Args:
        stats: Fitted class statistics, k >= 2
        alpha: Confidence level

    Returns:
        CertificateReport: Radii, verdicts, thresholds and per-class detail
    """
    k = stats.k
    m_min = stats.m_min
    r_pin = radius_pinelis(stats.radius, m_min, k, alpha)

    classes = []
    for c, m_c, gap, trace, op, rank, within in zip(
            stats.classes, stats.counts, stats.class_gaps, stats.traces,
            stats.op_norms, stats.stable_ranks, stats.within_radii):
        r_vp = radius_bernstein(trace, m_c, k, alpha)
        in_regime = stats.radius > 0 and r_vp <= trace / stats.radius
        thresholds = None
        if gap > 0:
            thresholds = class_sample_thresholds(stats.radius, op, gap, stats.dim, k, alpha)
        classes.append(ClassCertificate(
            label=c, count=m_c, class_gap=gap, trace=trace, op_norm=op, stable_rank=rank,
            within_radius=within, r_bernstein=r_vp,
            r_gaussian=radius_gaussian(op, m_c, stats.dim, k, alpha),
            bernstein_in_regime=bool(in_regime), thresholds=thresholds,
        ))

    r_vp = max(cc.r_bernstein for cc in classes)
    r_g = max(cc.r_gaussian for cc in classes)
    half = stats.delta / 2.0
    vp_in_regime = all(cc.bernstein_in_regime for cc in classes)

    fire_vp = stats.delta > 0 and all(cc.r_bernstein < cc.class_gap / 2.0 for cc in classes)
    if fire_vp and not vp_in_regime:
        logger.info("Variance-aware radius outside its small-deviation regime; verdict forced to no-fire")
        fire_vp = False

    report = CertificateReport(
        alpha=alpha, k=k, dim=stats.dim, delta=stats.delta, radius=stats.radius, m_min=m_min,
        r_pinelis=r_pin, r_bernstein=r_vp, r_gaussian=r_g,
        fire_pinelis=bool(r_pin < half),
        fire_bernstein=bool(fire_vp),
        fire_gaussian=bool(r_g < half),
        vp_in_regime=bool(vp_in_regime),
        classify_pinelis=_classifies(stats, (r_pin,) * k),
        classify_bernstein=_classifies(stats, tuple(cc.r_bernstein for cc in classes)),
        classify_gaussian=_classifies(stats, (r_g,) * k),
        classes=classes,
    )
    logger.debug("Certificate: r_pin=%.4g r_vp=%.4g r_g=%.4g half_delta=%.4g",
                 r_pin, r_vp, r_g, half)
    return report
