"""
Tables and records written by the command-line runs.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import beta

from diagram_landmarks.certify import CertificateReport
from diagram_landmarks.stats import RiskRate

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Cell text: repr for floats so reruns are byte-identical, 'NA' for None."""
    if value is None:
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class Table:
    """A titled table with a header row."""
    title: str
    header: Tuple[str, ...]
    rows: List[Tuple] = field(default_factory=list)

    def add(self, *row: Any):
        if len(row) != len(self.header):
            raise ValueError(f"Row of {len(row)} cells for a header of {len(self.header)}")
        self.rows.append(tuple(row))

    def to_tsv(self) -> str:
        lines = ["\t".join(self.header)]
        lines.extend("\t".join(format_value(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"


def write_table(path: Union[str, Path], table: Table) -> Path:
    """Write a table as tab-separated text."""
    path = Path(path)
    path.write_text(table.to_tsv(), encoding="utf-8")
    logger.info("Wrote %s (%d rows) to %s", table.title, len(table.rows), path)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_records(path: Union[str, Path], records: Iterable[Dict]) -> Path:
    """Write JSON lines with sorted keys."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")
    return path


def write_json(path: Union[str, Path], payload: Dict) -> Path:
    """Write one indented JSON document with sorted keys."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass
class Summary:
    """Mean and standard deviation of a sample."""
    mean: float
    std: float
    count: int


def summarize(values: Sequence[float]) -> Summary:
    """Mean and population standard deviation over folds x seeds."""
    if not len(values):
        raise ValueError("Cannot summarize an empty sample")
    array = np.asarray(values, dtype=float)
    return Summary(mean=float(array.mean()), std=float(array.std()), count=len(array))


def clopper_pearson_lower(successes: int, trials: int, confidence: float = 0.95) -> float:
    """One-sided exact binomial lower confidence bound on a success rate."""
    if trials < 1:
        raise ValueError("Clopper-Pearson bound needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError(f"Successes {successes} outside [0, {trials}]")
    if successes == 0:
        return 0.0
    return float(beta.ppf(1.0 - confidence, successes, trials - successes + 1))


FIRING_HEADER = ("descriptor", "folds", "median_r_pinelis", "median_r_bernstein", "median_r_gaussian",
                 "median_half_delta", "fire_pinelis_pct", "fire_bernstein_pct", "fire_gaussian_pct",
                 "vp_in_regime_pct")


def firing_table(reports: Dict[str, Sequence[CertificateReport]]) -> Table:
    """Per-fold medians of the radii and fire percentages, one row per descriptor."""
    table = Table("certificate firing", FIRING_HEADER)
    for name in sorted(reports):
        folds = reports[name]
        if not folds:
            continue

        def median(attr: str) -> float:
            return float(np.median([getattr(r, attr) for r in folds]))

        def percent(attr: str) -> float:
            return 100.0 * float(np.mean([bool(getattr(r, attr)) for r in folds]))

        table.add(name, len(folds), median("r_pinelis"), median("r_bernstein"), median("r_gaussian"),
                  median("half_delta"), percent("fire_pinelis"), percent("fire_bernstein"),
                  percent("fire_gaussian"), percent("vp_in_regime"))
    return table


ACCURACY_HEADER = ("descriptor", "classifier", "mean", "std", "folds")


def accuracy_table(accuracies: Dict[str, Dict[str, Sequence[float]]]) -> Table:
    """Mean and std of fold accuracies per descriptor and classifier."""
    table = Table("accuracy", ACCURACY_HEADER)
    for name in sorted(accuracies):
        for classifier in sorted(accuracies[name]):
            summary = summarize(accuracies[name][classifier])
            table.add(name, classifier, summary.mean, summary.std, summary.count)
    return table


AGREEMENT_HEADER = ("descriptor", "agreements", "predictions", "agreement", "lower_95")


def agreement_table(counts: Dict[str, Tuple[int, int]]) -> Table:
    """Empirical vs full-data nearest-centroid agreement with an exact lower bound."""
    table = Table("nearest-centroid agreement", AGREEMENT_HEADER)
    for name in sorted(counts):
        agree, total = counts[name]
        table.add(name, agree, total, agree / total if total else None,
                  clopper_pearson_lower(agree, total) if total else None)
    return table


def certificate_record(descriptor: str, seed: int, fold: int, report: CertificateReport,
                       risk: Optional[RiskRate] = None) -> Dict:
    """Flat record of one fold's certificate, with the excess-risk rate when delta > 0."""
    record = report.to_dict()
    record.update({"descriptor": descriptor, "seed": seed, "fold": fold})
    record["risk"] = asdict(risk) if risk is not None else None
    return record


def matrix_lines(matrix: np.ndarray) -> List[str]:
    """Tab-separated lines of a numeric matrix."""
    return ["\t".join(format_value(float(v)) for v in row) for row in np.atleast_2d(matrix)]
