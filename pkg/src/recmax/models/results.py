"""
Result and Error Types
======================
Plain value objects returned by the samplers, scanners and estimators,
plus the exception hierarchy used across the package.
"""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional

import numpy as np


class RecmaxError(Exception):
    """Base class for all package errors"""


class ModelError(RecmaxError, ValueError):
    """Invalid model parameters or an operation the model does not support"""


class DescriptorError(ModelError):
    """A model or copula descriptor string could not be parsed"""


class DimensionError(RecmaxError, ValueError):
    """Vector dimension does not match the model or drifts mid-stream"""


class DataFormatError(RecmaxError, ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ChampionTieError(RecmaxError):
    """Two observations both claim the champion position (tied input)"""


class EstimationError(RecmaxError):
    """An estimator cannot produce a value for the given input"""


def round12(value: Any) -> Any:
    """Round floats (recursively) to 12 significant digits for output."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
        return float(f"{value:.12g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {k: round12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round12(v) for v in value]
    if isinstance(value, np.ndarray):
        return [round12(v) for v in value.tolist()]
    return value


@dataclass(frozen=True)
class GeneratorSample:
    """One realisation of a generator Z (nonnegative, unit-mean components)."""
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ModelError("generator components must be nonnegative")


@dataclass(frozen=True)
class MaxStableSample:
    """One draw of a standard max-stable vector (all components < 0)."""
    values: np.ndarray
    bias_note: Optional[str] = None


@dataclass(frozen=True)
class Estimate:
    """
    Universal estimator return value.

    ``std_error`` is the sample standard deviation over sqrt(n_samples) for
    plain means; ratio and median-of-means estimators say so in ``method``.
    """
    value: float
    std_error: float
    n_samples: int
    method: str
    seed: int
    bias_note: Optional[str] = None
    divergence_flag: Optional[bool] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def within(self, target: float, sigmas: float = 4.0, slack: float = 0.0) -> bool:
        """True if ``target`` lies within ``sigmas`` standard errors (+ slack)."""
        return abs(self.value - target) <= sigmas * self.std_error + slack

    def to_dict(self) -> Dict[str, Any]:
        out = {
            'value': self.value,
            'std_error': self.std_error,
            'n_samples': self.n_samples,
            'method': self.method,
            'seed': self.seed,
        }
        if self.bias_note is not None:
            out['bias_note'] = self.bias_note
        if self.divergence_flag is not None:
            out['divergence_flag'] = self.divergence_flag
        if self.details:
            out['details'] = self.details
        return round12(out)


@dataclass
class RecordSummary:
    """Outcome of a single scan over a stream of observations."""
    n: int
    simple_count: int
    complete_count: int
    champion_index: Optional[int]
    simple_record_times: List[int]
    complete_record_times: List[int]
    gaps: List[int]

    def to_dict(self) -> Dict[str, Any]:
        return round12(asdict(self))
