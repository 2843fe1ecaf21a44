"""
Configuration management for the application.
"""
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Tuple

from dotenv import load_dotenv

from diagram_landmarks.errors import ConfigError

DEFAULT_C_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)
TAU_RULES = ("proxy", "crossing")
SELECTION_RULES = ("mah", "delta_over_r", "eta")


def _split_list(raw: str) -> Tuple[str, ...]:
    """Split a comma separated environment value, dropping blanks."""
    return tuple(item.strip() for item in raw.split(',') if item.strip())


def _env_number(name: str, default: Any, kind: Callable[[str], Any]) -> Any:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError as e:
        raise ConfigError(f"{name}={raw!r} is not a valid {kind.__name__}") from e


def _env_numbers(name: str, default: Tuple, kind: Callable[[str], Any]) -> Tuple:
    raw = os.getenv(name)
    if not raw:
        return default
    try:
        return tuple(kind(item) for item in _split_list(raw))
    except ValueError as e:
        raise ConfigError(f"{name}={raw!r} is not a list of {kind.__name__} values") from e


@dataclass
class RunConfig:
    """Run configuration.

    Defaults follow the evaluation protocol: top-50 persistence filter,
    10-fold stratified CV repeated over seeds 0..4, alpha = 0.05.
    """
    dataset: str = field(default="")
    output_dir: str = field(default="out")
    descriptors: Tuple[str, ...] = field(default=("degree+hks:10",))
    tau_rule: str = field(default="proxy")
    selection_rule: str = field(default="mah")
    n_scales: int = field(default=5)
    n_max: int = field(default=50)
    folds: int = field(default=10)
    inner_folds: int = field(default=5)
    seeds: Tuple[int, ...] = field(default=(0, 1, 2, 3, 4))
    alpha: float = field(default=0.05)
    c_grid: Tuple[float, ...] = field(default=DEFAULT_C_GRID)
    crossing_pairs: int = field(default=200)
    audit_pairs: int = field(default=2000)
    n_jobs: int = field(default=1)
    log_level: str = field(default="INFO")
    log_file: str = field(default="diagram_landmarks.log")

    @classmethod
    def from_env(cls) -> 'RunConfig':
        """
        Load configuration from environment variables.

        Raises:
            ConfigError: If a numeric variable cannot be parsed
        """
        load_dotenv()
        defaults = cls()

        descriptors = os.getenv('LANDMARKS_DESCRIPTORS')

        return cls(
            dataset=os.getenv('LANDMARKS_DATASET', defaults.dataset),
            output_dir=os.getenv('LANDMARKS_OUT', defaults.output_dir),
            descriptors=_split_list(descriptors) if descriptors else defaults.descriptors,
            tau_rule=os.getenv('LANDMARKS_TAU', defaults.tau_rule),
            selection_rule=os.getenv('LANDMARKS_SELECTION_RULE', defaults.selection_rule),
            n_scales=_env_number('LANDMARKS_N_SCALES', defaults.n_scales, int),
            n_max=_env_number('LANDMARKS_N_MAX', defaults.n_max, int),
            folds=_env_number('LANDMARKS_FOLDS', defaults.folds, int),
            seeds=_env_numbers('LANDMARKS_SEEDS', defaults.seeds, int),
            alpha=_env_number('LANDMARKS_ALPHA', defaults.alpha, float),
            c_grid=_env_numbers('LANDMARKS_C_GRID', defaults.c_grid, float),
            n_jobs=_env_number('LANDMARKS_N_JOBS', defaults.n_jobs, int),
            log_level=os.getenv('LOG_LEVEL', defaults.log_level),
            log_file=os.getenv('LOG_FILE', defaults.log_file),
        )

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """Return a copy with every non-None override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-serializable dict."""
        data = asdict(self)
        for key in ('descriptors', 'seeds', 'c_grid'):
            data[key] = list(data[key])
        return data

    def validate(self) -> Optional[str]:
        """
        Validate the configuration.

        Returns:
            Optional[str]: Error message if validation fails, None otherwise.
        """
        if not self.descriptors:
            return "Descriptors must not be empty"

        if self.tau_rule not in TAU_RULES:
            return f"Tau Rule must be one of {', '.join(TAU_RULES)}"

        if self.selection_rule not in SELECTION_RULES:
            return f"Selection Rule must be one of {', '.join(SELECTION_RULES)}"

        if self.n_scales < 1:
            return "N Scales must be greater than 0"

        if self.n_max < 1:
            return "N Max must be greater than 0"

        if self.folds < 2:
            return "Folds must be at least 2"

        if self.inner_folds < 2:
            return "Inner Folds must be at least 2"

        if not self.seeds:
            return "Seeds must not be empty"

        if not 0.0 < self.alpha < 1.0:
            return "Alpha must be between 0 and 1"

        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            return "C Grid must contain positive values"

        if self.crossing_pairs < 1 or self.audit_pairs < 1:
            return "Pair budgets must be greater than 0"

        if self.n_jobs == 0:
            return "N Jobs must be non-zero"

        return None
