"""
One-vs-one linear max-margin classifier with inner-CV choice of C.
"""
import logging
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.model_selection import StratifiedKFold
from sklearn.svm import LinearSVC

from diagram_landmarks.config import DEFAULT_C_GRID
from diagram_landmarks.errors import DataError

logger = logging.getLogger(__name__)

MAX_EPOCHS = 1000
TOLERANCE = 1e-4


@dataclass(eq=False)
class LinearModel:
    """Pairwise hyperplanes; pair (a, b) with a < b votes b when w.x + bias > 0."""
    classes: Tuple[int, ...]
    pairs: Tuple[Tuple[int, int], ...]
    weights: np.ndarray
    biases: np.ndarray
    C: float
    seed: int

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    def decision(self, features: np.ndarray) -> np.ndarray:
        """(n, n_pairs) decision values."""
        return features @ self.weights.T + self.biases

    def to_record(self) -> Dict:
        return {
            "classes": list(self.classes),
            "pairs": [list(p) for p in self.pairs],
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "C": self.C,
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, record: Dict) -> 'LinearModel':
        try:
            return cls(
                classes=tuple(int(c) for c in record["classes"]),
                pairs=tuple((int(a), int(b)) for a, b in record["pairs"]),
                weights=np.asarray(record["weights"], dtype=float),
                biases=np.asarray(record["biases"], dtype=float),
                C=float(record["C"]),
                seed=int(record["seed"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            logger.error("Error parsing linear model record: %s", e)
            raise DataError(f"Invalid linear model record: {e}") from e


def _fit_pair(features: np.ndarray, labels: np.ndarray, C: float, seed: int,
              intercept_scaling: float) -> Tuple[np.ndarray, float]:
    svc = LinearSVC(
        C=C,
        loss="hinge",
        dual=True,
        tol=TOLERANCE,
        max_iter=MAX_EPOCHS,
        random_state=seed,
        intercept_scaling=intercept_scaling,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ConvergenceWarning)
        svc.fit(features, labels)
    return svc.coef_[0].copy(), float(svc.intercept_[0])


def fit_pairs(features: np.ndarray, labels: np.ndarray, C: float, seed: int) -> LinearModel:
    """Fit every pairwise hyperplane at a fixed C."""
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise DataError("Linear training needs at least two classes")
    # Large intercept scaling keeps the bias close to unregularized
    scaling = max(1.0, 10.0 * float(np.linalg.norm(features, axis=1).max()))

    pairs = tuple(combinations(classes, 2))
    weights, biases = [], []
    for a, b in pairs:
        mask = (labels == a) | (labels == b)
        w, bias = _fit_pair(features[mask], labels[mask], C, seed, scaling)
        weights.append(w)
        biases.append(bias)
    return LinearModel(classes=classes, pairs=pairs, weights=np.vstack(weights),
                       biases=np.asarray(biases), C=float(C), seed=seed)


def predict_linear_batch(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """
    Majority vote over pairwise decisions for each row.

    Raises:
        ValueError: On a dimension mismatch
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise ValueError(f"Expected rows of dimension {model.dim}, got shape {features.shape}")
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((len(features), len(model.classes)), dtype=int)
    decisions = model.decision(features)
    for p, (a, b) in enumerate(model.pairs):
        positive = decisions[:, p] > 0
        votes[positive, index[b]] += 1
        votes[~positive, index[a]] += 1
    # argmax keeps the first maximum, i.e. the smallest label
    return np.asarray(model.classes)[np.argmax(votes, axis=1)]


def predict_linear(model: LinearModel, x: np.ndarray) -> int:
    """Label of a single embedded vector."""
    return int(predict_linear_batch(model, np.asarray(x, dtype=float)[None, :])[0])


def select_C(features: np.ndarray, labels: np.ndarray, c_grid: Sequence[float], seed: int,
             inner_folds: int = 5) -> float:
    """
    Pick C by stratified inner cross-validated accuracy; ties go to the smaller C.
    """
    grid = sorted(float(c) for c in c_grid)
    if len(grid) == 1:
        return grid[0]
    _, counts = np.unique(labels, return_counts=True)
    folds = min(inner_folds, int(counts.min()))
    if folds < inner_folds:
        logger.warning("Smallest class has %d samples; inner CV reduced to %d folds",
                       counts.min(), folds)
    if folds < 2:
        logger.warning("Inner CV impossible; using C=%s", grid[0])
        return grid[0]

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(features, labels))
    best_c, best_score = grid[0], -1.0
    for c in grid:
        correct = 0
        for train, test in splits:
            model = fit_pairs(features[train], labels[train], c, seed)
            correct += int(np.sum(predict_linear_batch(model, features[test]) == labels[test]))
        score = correct / len(labels)
        logger.debug("C=%s inner accuracy %.4f", c, score)
        if score > best_score:
            best_c, best_score = c, score
    return best_c


def train_linear(features: np.ndarray, labels: Sequence[int],
                 c_grid: Optional[Sequence[float]] = None, seed: int = 0,
                 inner_folds: int = 5) -> LinearModel:
    """
    Train the one-vs-one classifier.

    Args:
        features: (n, l) embedded corpus, used raw
        labels: Class labels
        c_grid: Candidate regularization values
        seed: Seed for inner splits and the solver
        inner_folds: Inner CV folds for choosing C

    Returns:
        LinearModel: Pairwise hyperplanes fitted on all rows at the chosen C

    Raises:
        DataError: On single-class input or a class with fewer than two samples
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise DataError("Linear training needs at least two classes")
    if counts.min() < 2:
        raise DataError(f"Class {classes[np.argmin(counts)]} has fewer than two samples")

    C = select_C(features, labels, c_grid or DEFAULT_C_GRID, seed, inner_folds)
    model = fit_pairs(features, labels, C, seed)
    logger.debug("Trained %d pairwise models at C=%s", len(model.pairs), C)
    return model


def accuracy(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of matching labels."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if len(truth) == 0:
        raise ValueError("Cannot score an empty prediction set")
    return float(np.mean(predicted == truth))

