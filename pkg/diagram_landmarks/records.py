"""
JSON-lines files of persistence diagrams.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from diagram_landmarks.diagram import PersistenceDiagram
from diagram_landmarks.errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class DiagramRecord:
    """A diagram with its optional class label."""
    diagram: PersistenceDiagram
    label: Optional[int] = None

    @classmethod
    def from_record(cls, data: Dict) -> 'DiagramRecord':
        """Create a DiagramRecord from a parsed JSON object.

        Args:
            data: Object with the following fields:
                - points (list): [birth, death] pairs
                - dim (int, optional): Homology dimension
                - label (int, optional): Class label
        """
        try:
            dim = data.get("dim")
            label = data.get("label")
            diagram = PersistenceDiagram.from_pairs(
                data["points"], None if dim is None else int(dim)
            )
            return cls(diagram=diagram, label=None if label is None else int(label))
        except (KeyError, ValueError, TypeError, AttributeError) as e:
            raise ValueError(f"Invalid diagram record: {e}") from e

    def to_record(self) -> Dict:
        return {
            "points": [[p.birth, p.death] for p in self.diagram.points],
            "dim": self.diagram.homology_dim,
            "label": self.label,
        }


def read_diagrams(path: Union[str, Path]) -> List[DiagramRecord]:
    """
    Read a diagram file, one JSON object per line; blank lines are skipped.

    Raises:
        DataError: On a malformed line, reported with its 1-based line number
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Diagram file not found: {path}")
    records = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(DiagramRecord.from_record(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as e:
                logger.error("Error parsing diagram at %s:%d: %s", path.name, number, e)
                logger.error("Raw diagram line: %s", line.rstrip()[:200])
                raise DataError(f"{path.name}:{number}: {e}") from e
    logger.debug("Read %d diagrams from %s", len(records), path)
    return records


def write_diagrams(path: Union[str, Path], records: Iterable[DiagramRecord]) -> int:
    """Write diagrams as JSON lines with sorted keys; returns the record count."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_record(), sort_keys=True) + "\n")
            count += 1
    logger.debug("Wrote %d diagrams to %s", count, path)
    return count
