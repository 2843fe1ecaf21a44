"""Tests for the stats module."""
import math
import unittest

import numpy as np
import pytest

from diagram_landmarks.errors import DataError, NumericGuardError
from diagram_landmarks.stats import (
    MAHALANOBIS_DIM_CAP,
    ShrunkCovariance,
    eta,
    fit_class_stats,
    ledoit_wolf,
    linear_separability,
    mahalanobis_margin,
    operator_norm,
    pooled_centered,
    risk_rate,
    select_descriptor,
)


def two_blobs(rng, m=40, dim=3, shift=4.0, spread=(1.0, 1.0)):
    """Two Gaussian classes whose means differ by shift along the first axis."""
    offset = np.zeros(dim)
    offset[0] = shift
    a = rng.normal(scale=spread[0], size=(m, dim))
    b = rng.normal(scale=spread[1], size=(m, dim)) + offset
    return np.vstack([a, b]), np.array([0] * m + [1] * m)


class TestOperatorNorm(unittest.TestCase):
    """Test cases for operator_norm."""

    def test_matches_eigvalsh(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(30, 6)) * np.array([3.0, 1.0, 1.0, 0.5, 0.2, 0.1])
        centered = rows - rows.mean(axis=0)
        expected = np.linalg.eigvalsh(np.cov(centered, rowvar=False)).max()
        self.assertAlmostEqual(operator_norm(centered), expected, delta=1e-6 * expected)

    def test_zero_rows(self):
        self.assertEqual(operator_norm(np.zeros((5, 3))), 0.0)

    def test_single_row(self):
        self.assertEqual(operator_norm(np.ones((1, 3))), 0.0)


class TestFitClassStats(unittest.TestCase):
    """Test cases for fit_class_stats."""

    def test_two_points_per_class(self):
        features = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 4.0], [2.0, 4.0]])
        stats = fit_class_stats(features, [5, 5, 7, 7])
        self.assertEqual(stats.classes, (5, 7))
        np.testing.assert_allclose(stats.means, [[1.0, 0.0], [1.0, 4.0]])
        self.assertEqual(stats.delta, 4.0)
        self.assertEqual(stats.class_gaps, (4.0, 4.0))
        self.assertEqual(stats.counts, (2, 2))
        # centered rows (+-1, 0): trace = 2 / (2 - 1)
        self.assertAlmostEqual(stats.traces[0], 2.0)
        self.assertAlmostEqual(stats.op_norms[0], 2.0, places=6)
        self.assertAlmostEqual(stats.radius, math.sqrt(20.0))
        self.assertEqual(stats.within_radii, (1.0, 1.0))
        self.assertAlmostEqual(stats.stable_ranks[0], 1.0, places=6)
        self.assertEqual(stats.m_min, 2)
        self.assertEqual(stats.dim, 2)

    def test_single_sample_class(self):
        features = np.array([[0.0], [1.0], [5.0]])
        stats = fit_class_stats(features, [0, 0, 1])
        self.assertEqual(stats.traces[1], 0.0)
        self.assertEqual(stats.op_norms[1], 0.0)
        self.assertIsNone(stats.stable_ranks[1])

    def test_one_class_rejected(self):
        with self.assertRaises(DataError):
            fit_class_stats(np.zeros((3, 2)), [1, 1, 1])

    def test_shape_mismatch_rejected(self):
        with self.assertRaises(DataError):
            fit_class_stats(np.zeros((3, 2)), [0, 1])

    def test_drop_centered(self):
        stats = fit_class_stats(np.eye(4), [0, 0, 1, 1], keep_centered=False)
        self.assertIsNone(stats.centered)
        with self.assertRaises(ValueError):
            pooled_centered(stats)

    def test_eta(self):
        stats = fit_class_stats(np.array([[0.0, 0.0], [0.0, 3.0]]), [0, 1])
        self.assertAlmostEqual(eta(stats, 9), 1.0)
        with self.assertRaises(ValueError):
            eta(stats, 0)


class TestLedoitWolf(unittest.TestCase):
    """Test cases for the shrinkage estimator."""

    def test_matches_sklearn_intensity_range(self):
        rng = np.random.default_rng(1)
        centered = rng.normal(size=(20, 8))
        shrunk = ledoit_wolf(centered)
        self.assertGreaterEqual(shrunk.shrinkage, 0.0)
        self.assertLessEqual(shrunk.shrinkage, 1.0)
        np.testing.assert_allclose(shrunk.matrix, shrunk.matrix.T)
        self.assertGreater(np.linalg.eigvalsh(shrunk.matrix).min(), 0.0)
        self.assertAlmostEqual(shrunk.mu, float((centered ** 2).sum() / (20 * 8)))

    def test_hand_computed_two_by_two(self):
        # S = diag(1/2, 2), mu = 5/4, d^2 = 9/16, b^2 = 17/32, shrinkage 17/18
        centered = np.array([[1.0, 0.0], [0.0, 2.0], [-1.0, 0.0], [0.0, -2.0]])
        shrunk = ledoit_wolf(centered)
        self.assertAlmostEqual(shrunk.shrinkage, 17 / 18)
        self.assertAlmostEqual(shrunk.mu, 1.25)
        np.testing.assert_allclose(shrunk.matrix, np.diag([21.75 / 18, 23.25 / 18]), atol=1e-12)

    def test_scaled_identity_is_fixed(self):
        sigma = 1.5
        centered = sigma * math.sqrt(2.0) * np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        shrunk = ledoit_wolf(centered)
        np.testing.assert_allclose(shrunk.matrix, sigma ** 2 * np.eye(2), atol=1e-12)
        self.assertAlmostEqual(shrunk.mu, sigma ** 2)

    def test_zero_covariance(self):
        shrunk = ledoit_wolf(np.zeros((4, 3)), radius=2.0)
        np.testing.assert_allclose(shrunk.matrix, 4e-12 * np.eye(3))
        self.assertEqual(shrunk.shrinkage, 1.0)

    def test_single_sample_rejected(self):
        with self.assertRaises(ValueError):
            ledoit_wolf(np.ones((1, 3)))

    def test_dimension_cap(self):
        with self.assertRaises(NumericGuardError):
            ledoit_wolf(np.zeros((2, MAHALANOBIS_DIM_CAP + 1)))


class TestMahalanobis(unittest.TestCase):
    """Test cases for the Mahalanobis margin."""

    def test_identity_covariance_gives_euclidean(self):
        stats = fit_class_stats(np.array([[0.0, 0.0], [3.0, 4.0]]), [0, 1])
        shrunk = ShrunkCovariance(matrix=np.eye(2), shrinkage=1.0, mu=1.0)
        self.assertAlmostEqual(mahalanobis_margin(stats, shrunk), 5.0)

    def test_scaled_covariance(self):
        stats = fit_class_stats(np.array([[0.0, 0.0], [2.0, 0.0]]), [0, 1])
        shrunk = ShrunkCovariance(matrix=np.diag([4.0, 1.0]), shrinkage=0.0, mu=2.5)
        self.assertAlmostEqual(mahalanobis_margin(stats, shrunk), 1.0)

    def test_minimum_over_pairs(self):
        stats = fit_class_stats(np.array([[0.0], [1.0], [10.0]]), [0, 1, 2])
        shrunk = ShrunkCovariance(matrix=np.eye(1), shrinkage=1.0, mu=1.0)
        self.assertAlmostEqual(mahalanobis_margin(stats, shrunk), 1.0)

    def test_not_positive_definite(self):
        stats = fit_class_stats(np.array([[0.0, 0.0], [1.0, 0.0]]), [0, 1])
        shrunk = ShrunkCovariance(matrix=np.zeros((2, 2)), shrinkage=0.0, mu=0.0)
        with self.assertRaises(NumericGuardError):
            mahalanobis_margin(stats, shrunk)

    def test_pooled_rows_average_class_covariances(self):
        rng = np.random.default_rng(2)
        features, labels = two_blobs(rng, m=25, spread=(1.0, 2.0))
        stats = fit_class_stats(features, labels)
        pooled = pooled_centered(stats)
        average = (np.cov(features[labels == 0], rowvar=False) + np.cov(features[labels == 1], rowvar=False)) / 2
        np.testing.assert_allclose(pooled.T @ pooled / len(pooled), average, atol=1e-10)


class TestSelection(unittest.TestCase):
    """Test cases for select_descriptor."""

    def setUp(self):
        rng = np.random.default_rng(3)
        self.good, self.labels = two_blobs(rng, shift=6.0)
        self.bad, _ = two_blobs(rng, shift=0.5)

    def test_picks_separated_descriptor(self):
        for rule in ("mah", "delta_over_r", "eta"):
            report = select_descriptor({"good": self.good, "bad": self.bad}, self.labels, rule=rule)
            self.assertEqual(report.chosen, "good")
            self.assertEqual(report.rank_of("bad", rule), 2)

    def test_rows_sorted_by_name(self):
        report = select_descriptor({"zeta": self.good, "alpha": self.bad}, self.labels, rule="eta")
        self.assertEqual([row[0] for row in report.to_rows()], ["alpha", "zeta"])
        self.assertEqual(len(report.to_rows()[0]), 10)

    def test_ties_broken_by_name(self):
        report = select_descriptor({"b": self.good, "a": self.good.copy()}, self.labels, rule="delta_over_r")
        self.assertEqual(report.chosen, "a")

    def test_unknown_rule(self):
        with self.assertRaises(ValueError):
            select_descriptor({"good": self.good}, self.labels, rule="margin")

    def test_empty_pool(self):
        with self.assertRaises(ValueError):
            select_descriptor({}, self.labels)

    def test_statistics(self):
        report = select_descriptor({"good": self.good}, self.labels, rule="eta")
        row = report.rows[0]
        stats = fit_class_stats(self.good, self.labels)
        self.assertAlmostEqual(row.delta, stats.delta)
        self.assertAlmostEqual(row.eta, stats.delta / math.sqrt(3))
        self.assertAlmostEqual(row.delta_over_r, stats.delta / stats.radius)
        self.assertIsNotNone(row.mahalanobis)


def test_mahalanobis_rewards_low_noise_direction():
    """Same Euclidean gap, but the margin is larger where within-class noise is smaller."""
    rng = np.random.default_rng(4)
    labels = np.array([0] * 50 + [1] * 50)
    noise = rng.normal(size=(100, 2)) * np.array([0.1, 3.0])
    along_quiet = noise + np.outer(labels, [2.0, 0.0])
    along_noisy = noise + np.outer(labels, [0.0, 2.0])
    report = select_descriptor({"quiet": along_quiet, "noisy": along_noisy}, labels, rule="mah")
    assert report.chosen == "quiet"


class TestRiskRate(unittest.TestCase):
    """Test cases for risk_rate."""

    def test_rate(self):
        rate = risk_rate(k=2, radius=1.0, delta=0.5, m_min=64)
        self.assertAlmostEqual(rate.rate, 8.0 * 1.0 / (0.5 * 8.0))
        self.assertAlmostEqual(rate.required_m, 128.0 * math.log(4 * 2 / 0.05) / 0.25)
        self.assertFalse(rate.hypothesis_holds)

    def test_hypothesis_holds(self):
        self.assertTrue(risk_rate(k=2, radius=1.0, delta=1.0, m_min=10 ** 4).hypothesis_holds)

    def test_rejects_zero_delta(self):
        with self.assertRaises(ValueError):
            risk_rate(k=2, radius=1.0, delta=0.0, m_min=5)


@pytest.mark.parametrize("spread,separable", [(0.1, True), (3.0, False)])
def test_linear_separability(spread, separable):
    rng = np.random.default_rng(5)
    features, labels = two_blobs(rng, m=20, dim=2, shift=4.0, spread=(spread, spread))
    report = linear_separability(fit_class_stats(features, labels))
    assert report.separable is separable
    assert report.margin == pytest.approx(report.half_delta - report.max_within_radius)


def random_pool(rng, n_descriptors=3, m=30, k=3):
    """Descriptors with random dimensions, class offsets and anisotropic noise."""
    labels = np.repeat(np.arange(k), m)
    pool = {}
    for i in range(n_descriptors):
        dim = int(rng.integers(2, 6))
        offsets = rng.normal(scale=2.0, size=(k, dim))
        scales = rng.uniform(0.2, 2.0, size=dim)
        pool[f"f{i}"] = offsets[labels] + rng.normal(size=(k * m, dim)) * scales
    return pool, labels


@pytest.mark.parametrize("seed", range(5))
def test_mahalanobis_dominates_scaled_delta(seed):
    """rho_Mah >= Delta / sqrt(||Sigma_LW||_op) for every descriptor of a pool."""
    pool, labels = random_pool(np.random.default_rng(seed))
    for features in pool.values():
        stats = fit_class_stats(features, labels)
        shrunk = ledoit_wolf(pooled_centered(stats), radius=stats.radius)
        top = np.linalg.eigvalsh(shrunk.matrix).max()
        assert mahalanobis_margin(stats, shrunk) >= stats.delta / math.sqrt(top) - 1e-8


@pytest.mark.parametrize("factor", [0.01, 3.0, 250.0])
def test_selection_scaling_equivariance(factor):
    pool, labels = random_pool(np.random.default_rng(11))
    base = select_descriptor(pool, labels, rule="mah")
    scaled = select_descriptor({name: factor * x for name, x in pool.items()}, labels, rule="mah")
    assert scaled.rankings["mah"] == base.rankings["mah"]
    for before, after in zip(base.rows, scaled.rows):
        assert after.delta == pytest.approx(factor * before.delta)
        assert after.radius == pytest.approx(factor * before.radius)
        assert after.eta == pytest.approx(factor * before.eta)
        assert after.mahalanobis == pytest.approx(before.mahalanobis, rel=1e-6)


@pytest.mark.slow
def test_delta_error_decays_at_root_rate():
    """Mean |Delta_hat - Delta| on bounded data falls with slope near -1/2 in log-log."""
    rng = np.random.default_rng(12)
    sizes = np.array([50, 100, 200, 400, 800, 1600])
    shift = np.array([1.0, 0.0, 0.0])
    errors = []
    for m in sizes:
        labels = np.repeat([0, 1], m)
        trial = []
        for _ in range(300):
            features = rng.uniform(-1.0, 1.0, size=(2 * m, 3))
            features[m:] += shift
            trial.append(abs(fit_class_stats(features, labels, keep_centered=False).delta - 1.0))
        errors.append(np.mean(trial))
    slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
    assert -0.65 <= slope <= -0.35


@pytest.mark.slow
def test_eta_recovers_planted_winner():
    """The descriptor with the largest population Delta / sqrt(l) wins eta selection in >= 95% of draws."""
    rng = np.random.default_rng(13)
    m = 100
    labels = np.repeat([0, 1], m)
    planted = {"winner": (4, 3.0), "narrow": (4, 2.0), "wide": (16, 4.0)}
    wins = 0
    for _ in range(200):
        pool = {}
        for name, (dim, gap) in planted.items():
            features = rng.normal(size=(2 * m, dim))
            features[m:, 0] += gap
            pool[name] = features
        wins += select_descriptor(pool, labels, rule="eta").chosen == "winner"
    assert wins / 200 >= 0.95
