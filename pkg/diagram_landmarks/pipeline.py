"""
Orchestration of the batch runs: dataset -> diagrams -> embedding -> reports.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from diagram_landmarks.audit import (
    BOUND_HEADER,
    COHERENCE_HEADER,
    audit_pairs,
    lambda_bridge,
    summarize_bound,
    summarize_coherence,
)
from diagram_landmarks.certify import CertificateReport, certify, nc_predict_batch
from diagram_landmarks.config import RunConfig
from diagram_landmarks.datasets import load_tu_dataset, load_vertex_function_table
from diagram_landmarks.diagram import PersistenceDiagram, filter_top_n
from diagram_landmarks.embedding import (
    ScaleConfig,
    auto_bound,
    embed_corpus,
    make_scale_config,
    tau_crossing,
    tau_proxy,
)
from diagram_landmarks.errors import DataError
from diagram_landmarks.graphfilt import corpus_diagrams, descriptor_slug, parse_descriptor
from diagram_landmarks.linear import accuracy, predict_linear_batch, train_linear
from diagram_landmarks.records import DiagramRecord, read_diagrams, write_diagrams
from diagram_landmarks.reports import (
    Table,
    accuracy_table,
    agreement_table,
    certificate_record,
    firing_table,
    write_json,
    write_records,
    write_table,
)
from diagram_landmarks.stats import (
    SELECTION_HEADER,
    RiskRate,
    fit_class_stats,
    linear_separability,
    risk_rate,
    select_descriptor,
)

logger = logging.getLogger(__name__)

DIAGRAM_FILE_DESCRIPTOR = "diagrams"


@dataclass
class Corpus:
    """Labeled diagrams per descriptor."""
    name: str
    labels: np.ndarray
    diagrams: Dict[str, List[PersistenceDiagram]]


@dataclass
class FoldResult:
    """Outcome of one outer fold."""
    descriptor: str
    seed: int
    fold: int
    tau_star: float
    bound: float
    nc_accuracy: float
    linear_accuracy: float
    C: float
    agreements: int
    n_test: int
    certificate: CertificateReport
    risk: Optional[RiskRate] = None


FOLD_HEADER = ("descriptor", "seed", "fold", "tau_star", "bound", "nc_accuracy",
               "linear_accuracy", "C", "agreements", "n_test", "risk_rate", "risk_hypothesis")


def estimate_tau(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int], config: RunConfig,
                 seed: int = 0) -> float:
    """Scale center under the configured rule."""
    if config.tau_rule == "crossing":
        return tau_crossing(diagrams, labels, config.crossing_pairs, seed)
    return tau_proxy(diagrams)


def fit_scale_config(diagrams: Sequence[PersistenceDiagram], labels: Sequence[int],
                     config: RunConfig, seed: int = 0) -> ScaleConfig:
    """Scale ladder and grids fitted on the given diagrams only."""
    bound = auto_bound(diagrams)
    tau = estimate_tau(diagrams, labels, config, seed)
    return make_scale_config(tau, config.n_scales, bound)


def effective_folds(labels: np.ndarray, folds: int) -> int:
    """Fold count reduced to the smallest class size."""
    smallest = int(np.unique(labels, return_counts=True)[1].min())
    if smallest < folds:
        logger.warning(f"Smallest class has {smallest} members; using {smallest} folds instead of {folds}")
    if smallest < 2:
        raise DataError("Every class needs at least two members for cross-validation")
    return min(folds, smallest)


def outer_splits(labels: np.ndarray, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified, shuffled (train, test) index pairs for one seed."""
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(splitter.split(np.zeros(len(labels)), labels))


def run_fold(descriptor: str, diagrams: Sequence[PersistenceDiagram], labels: np.ndarray,
             train: np.ndarray, test: np.ndarray, config: RunConfig, seed: int, fold: int) -> FoldResult:
    """
    Fit the scale center, class statistics, classifiers and certificate on the
    training rows and score the test rows. The bound L is label-free and taken
    from the whole corpus so every test diagram stays embeddable. Diagrams are
    padded with diagonal points to n_max before embedding.
    """
    train_diagrams = [diagrams[i] for i in train]
    tau = estimate_tau(train_diagrams, labels[train], config, seed)
    scale_config = make_scale_config(tau, config.n_scales, auto_bound(diagrams))

    full = embed_corpus(diagrams, scale_config, config.n_max)
    x_train, x_test = full[train], full[test]
    y_train, y_test = labels[train], labels[test]

    stats = fit_class_stats(x_train, y_train)
    nc_pred = nc_predict_batch(x_test, stats)
    model = train_linear(x_train, y_train, config.c_grid, seed, config.inner_folds)
    report = certify(stats, config.alpha)
    risk = None
    if stats.delta > 0:
        risk = risk_rate(stats.k, stats.radius, stats.delta, stats.m_min, config.alpha)

    # full-data nearest-centroid rule as a population proxy
    reference = nc_predict_batch(x_test, fit_class_stats(full, labels, keep_centered=False))

    result = FoldResult(
        descriptor=descriptor,
        seed=seed,
        fold=fold,
        tau_star=tau,
        bound=scale_config.bound,
        nc_accuracy=accuracy(nc_pred, y_test),
        linear_accuracy=accuracy(predict_linear_batch(model, x_test), y_test),
        C=model.C,
        agreements=int(np.sum(nc_pred == reference)),
        n_test=len(test),
        certificate=report,
        risk=risk,
    )
    logger.info(f"Fold {fold} (seed {seed}, {descriptor}): NC {result.nc_accuracy:.3f}, "
                f"linear {result.linear_accuracy:.3f}, vP fire {report.fire_bernstein}")
    return result


class LandmarkPipeline:
    """Runs the embed, select, evaluate and audit stages for one configuration."""

    def __init__(self, config: RunConfig, state_file: Optional[str] = None):
        """Initialize the pipeline.

        Args:
            config: Run configuration
            state_file: Chemin vers le fichier de state (default: <out>/.state.json)
        """
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.state_file = Path(state_file) if state_file else self.output_dir / ".state.json"

        # Charger ou créer le state
        self.state = self._load_state()
        self._corpus: Optional[Corpus] = None

    def _load_state(self) -> Dict:
        """Charge le state depuis le fichier ou crée un nouveau state."""
        if self.state_file.exists():
            try:
                with open(self.state_file, encoding="utf-8") as f:
                    return json.load(f)
            except (OSError, ValueError) as e:
                logger.error(f"Erreur lors du chargement du state: {e}")

        # State par défaut
        return {
            "last_command": None,
            "last_status": None,
            "completed": [],
            "error_count": 0,
            "last_error": None,
        }

    def _save_state(self):
        """Sauvegarde le state dans le fichier."""
        try:
            with open(self.state_file, "w", encoding="utf-8") as f:
                json.dump(self.state, f, indent=2, sort_keys=True)
        except OSError as e:
            logger.error(f"Erreur lors de la sauvegarde du state: {e}")

    def _update_state(self, command: str, success: bool, error: Optional[str] = None):
        """Met à jour le state après une commande."""
        self.state["last_command"] = command
        self.state["last_status"] = "success" if success else "error"
        if success:
            self.state["error_count"] = 0
            self.state["last_error"] = None
            if command not in self.state["completed"]:
                self.state["completed"].append(command)
        else:
            self.state["error_count"] += 1
            self.state["last_error"] = error
        self._save_state()

    def run(self, command: str):
        """Run one stage, recording its outcome in the state file."""
        stages = {
            "embed": self.embed,
            "select": self.select,
            "evaluate": self.evaluate,
            "audit": self.audit,
        }
        if command not in stages:
            raise ValueError(f"Unknown command: {command}")
        logger.info(f"Starting {command} on {self.config.dataset}")
        try:
            write_json(self.output_dir / "run_config.json", self.config.to_dict())
            result = stages[command]()
        except Exception as e:
            logger.error(f"Command {command} failed: {e}")
            self._update_state(command, False, error=str(e))
            raise
        self._update_state(command, True)
        logger.info(f"Finished {command}")
        return result

    # corpus

    def load_corpus(self) -> Corpus:
        """Diagrams per descriptor from a TU directory or a labeled diagram file."""
        if self._corpus is not None:
            return self._corpus
        source = Path(self.config.dataset)
        if source.is_file():
            records = read_diagrams(source)
            if any(r.label is None for r in records):
                raise DataError(f"{source.name}: every diagram needs a label")
            labels = np.array([r.label for r in records], dtype=int)
            diagrams = [filter_top_n(r.diagram, self.config.n_max) if len(r.diagram) else r.diagram
                        for r in records]
            self._corpus = Corpus(source.stem, labels, {DIAGRAM_FILE_DESCRIPTOR: diagrams})
            return self._corpus

        dataset = load_tu_dataset(source)
        pools = {}
        for descriptor in self.config.descriptors:
            tables = self._load_tables(descriptor, dataset.graphs)
            pools[descriptor] = corpus_diagrams(dataset.graphs, descriptor, self.config.n_max,
                                                tables, self.config.n_jobs)
        self._corpus = Corpus(dataset.name, dataset.labels, pools)
        return self._corpus

    @staticmethod
    def _load_tables(descriptor: str, graphs) -> Optional[Dict[str, List[np.ndarray]]]:
        tables = {
            part.label: load_vertex_function_table(part.argument, graphs)
            for part in parse_descriptor(descriptor) if part.kind == "table"
        }
        return tables or None

    def _descriptor_dir(self, descriptor: str) -> Path:
        path = self.output_dir / descriptor_slug(descriptor)
        path.mkdir(parents=True, exist_ok=True)
        return path

    # stages

    def embed(self) -> Dict[str, ScaleConfig]:
        """Write diagrams, embedded matrices, scale records and grid tables per descriptor."""
        corpus = self.load_corpus()
        np.save(self.output_dir / "labels.npy", corpus.labels)
        configs = {}
        for descriptor, diagrams in corpus.diagrams.items():
            target = self._descriptor_dir(descriptor)
            write_diagrams(target / "diagrams.jsonl",
                           (DiagramRecord(d, int(y)) for d, y in zip(diagrams, corpus.labels)))
            scale_config = fit_scale_config(diagrams, corpus.labels, self.config)
            np.save(target / "embedding.npy", embed_corpus(diagrams, scale_config, self.config.n_max))
            write_json(target / "scale_config.json", scale_config.to_record())
            for k, grid in enumerate(scale_config.grids, start=1):
                table = Table(f"grid R{k}", ("m", "n", "birth", "death"), grid.to_rows())
                write_table(target / f"grid_R{k}.tsv", table)
            configs[descriptor] = scale_config
            logger.info(f"Embedded {len(diagrams)} diagrams for {descriptor} "
                        f"into dimension {scale_config.total_dim}")
        return configs

    def select(self, rule: Optional[str] = None):
        """Rank the descriptor pool on the full corpus."""
        rule = rule or self.config.selection_rule
        corpus = self.load_corpus()
        pool = {
            descriptor: embed_corpus(diagrams, fit_scale_config(diagrams, corpus.labels, self.config),
                                     self.config.n_max)
            for descriptor, diagrams in corpus.diagrams.items()
        }
        report = select_descriptor(pool, corpus.labels, rule)
        write_table(self.output_dir / "selection.tsv", Table("selection", SELECTION_HEADER, report.to_rows()))
        return report

    def evaluate(self) -> List[FoldResult]:
        """Outer stratified folds x seeds: accuracies, certificates and agreement."""
        corpus = self.load_corpus()
        labels = corpus.labels
        folds = effective_folds(labels, self.config.folds)

        jobs = []
        for descriptor, diagrams in corpus.diagrams.items():
            for seed in self.config.seeds:
                for fold, (train, test) in enumerate(outer_splits(labels, folds, seed)):
                    jobs.append((descriptor, diagrams, train, test, seed, fold))

        results = Parallel(n_jobs=self.config.n_jobs)(
            delayed(run_fold)(descriptor, diagrams, labels, train, test, self.config, seed, fold)
            for descriptor, diagrams, train, test, seed, fold in jobs
        )
        self._write_evaluation(results)
        return results

    def _write_evaluation(self, results: Sequence[FoldResult]):
        fold_table = Table("folds", FOLD_HEADER)
        accuracies: Dict[str, Dict[str, List[float]]] = {}
        certificates: Dict[str, List[CertificateReport]] = {}
        agreement: Dict[str, Tuple[int, int]] = {}
        for r in results:
            fold_table.add(r.descriptor, r.seed, r.fold, r.tau_star, r.bound, r.nc_accuracy,
                           r.linear_accuracy, r.C, r.agreements, r.n_test,
                           r.risk.rate if r.risk else None, r.risk.hypothesis_holds if r.risk else None)
            per = accuracies.setdefault(r.descriptor, {"linear": [], "nc": []})
            per["linear"].append(r.linear_accuracy)
            per["nc"].append(r.nc_accuracy)
            certificates.setdefault(r.descriptor, []).append(r.certificate)
            agree, total = agreement.get(r.descriptor, (0, 0))
            agreement[r.descriptor] = (agree + r.agreements, total + r.n_test)

        write_table(self.output_dir / "folds.tsv", fold_table)
        write_table(self.output_dir / "accuracy.tsv", accuracy_table(accuracies))
        write_table(self.output_dir / "firing.tsv", firing_table(certificates))
        write_table(self.output_dir / "agreement.tsv", agreement_table(agreement))
        write_records(self.output_dir / "certificates.jsonl",
                      (certificate_record(r.descriptor, r.seed, r.fold, r.certificate, r.risk) for r in results))

    def audit(self) -> Dict[str, Dict]:
        """Coherence and certificate-bound audits with the separation bridge, per descriptor."""
        corpus = self.load_corpus()
        seed = self.config.seeds[0]
        coherence_table = Table("coherence audit", ("descriptor",) + COHERENCE_HEADER)
        bound_table = Table("certificate-bound audit", ("descriptor",) + BOUND_HEADER)
        records, outcome = [], {}
        for descriptor, diagrams in corpus.diagrams.items():
            scale_config = fit_scale_config(diagrams, corpus.labels, self.config, seed)
            pairs = audit_pairs(diagrams, corpus.labels, scale_config, self.config.audit_pairs,
                                seed, self.config.n_jobs, self.config.n_max)
            coherence = summarize_coherence(pairs, seed)
            bound = summarize_bound(pairs, seed)
            stats = fit_class_stats(embed_corpus(diagrams, scale_config, self.config.n_max), corpus.labels)
            bridge = lambda_bridge([p.distance for p in pairs], scale_config, stats)
            separability = linear_separability(stats)

            coherence_table.add(descriptor, *(coherence.to_dict()[column] for column in COHERENCE_HEADER))
            bound_table.add(descriptor, *(bound.to_dict()[column] for column in BOUND_HEADER))
            record = {"descriptor": descriptor, "coherence": coherence.to_dict(), "bound": bound.to_dict(),
                      "bridge": bridge.to_dict(),
                      "separable": separability.separable, "separation_margin": separability.margin}
            records.append(record)
            outcome[descriptor] = record
        write_table(self.output_dir / "audit_coherence.tsv", coherence_table)
        write_table(self.output_dir / "audit_bound.tsv", bound_table)
        write_records(self.output_dir / "audit.jsonl", records)
        return outcome
