"""
File Input and Output
=====================
Observation files (CSV with an ``x1,...,xd`` header, or newline-delimited
JSON arrays), JSON reports and CSV tables.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..models.results import DataFormatError, RecordSummary, round12

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = '%.12g'


def _read_csv(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path} is empty", line=1) from None
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: {e}") from None
    if frame.shape[1] == 0:
        raise DataFormatError(f"{path} has no columns", line=1)
    values = np.empty(frame.shape, dtype=float)
    for row_number, row in enumerate(frame.itertuples(index=False)):
        for col, cell in enumerate(row):
            if not isinstance(cell, str):
                raise DataFormatError(f"missing value in column '{frame.columns[col]}'",
                                      line=row_number + 2)
            try:
                values[row_number, col] = float(cell)
            except (TypeError, ValueError):
                # +2: header line and 1-based numbering
                raise DataFormatError(
                    f"column '{frame.columns[col]}' has non-numeric value '{cell}'",
                    line=row_number + 2,
                ) from None
            if not np.isfinite(values[row_number, col]):
                raise DataFormatError(f"non-finite value '{cell}'", line=row_number + 2)
    return values


def _read_ndjson(path: Path) -> np.ndarray:
    rows: List[List[float]] = []
    with open(path, encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                item = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"invalid JSON ({e.msg})", line=line_number) from None
            if not isinstance(item, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in item
            ):
                raise DataFormatError("expected an array of numbers", line=line_number)
            if rows and len(item) != len(rows[0]):
                raise DataFormatError(
                    f"row has {len(item)} values, expected {len(rows[0])}", line=line_number
                )
            rows.append([float(v) for v in item])
    if not rows:
        raise DataFormatError(f"{path} contains no observations")
    return np.array(rows, dtype=float)


def read_observations(path: PathLike) -> np.ndarray:
    """
    Load observations as an (n, d) array.

    ``.ndjson``, ``.jsonl`` and ``.json`` files hold one JSON array per line;
    anything else is read as CSV with a header row.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"input file not found: {path}")
    if path.suffix.lower() in ('.ndjson', '.jsonl', '.json'):
        values = _read_ndjson(path)
    else:
        values = _read_csv(path)
    if values.shape[0] == 0:
        raise DataFormatError(f"{path} contains no observations")
    logger.info("read %d observations of dimension %d from %s", values.shape[0], values.shape[1], path)
    return values


def dumps_json(payload: Dict[str, Any]) -> str:
    """Canonical JSON text (12 significant digits, sorted keys)."""
    return json.dumps(round12(payload), indent=2, sort_keys=True)


def write_json(payload: Dict[str, Any], path: Optional[PathLike] = None) -> str:
    text = dumps_json(payload)
    if path is not None:
        Path(path).write_text(text + '\n', encoding='utf-8')
    return text


def write_summary_json(summary: RecordSummary, path: Optional[PathLike] = None,
                       config: Optional[dict] = None) -> str:
    """Record summary as JSON, with the run config echoed under ``config``."""
    payload = summary.to_dict()
    if config is not None:
        payload['config'] = config
    return write_json(payload, path)


def write_record_times_csv(summary: RecordSummary, path: PathLike) -> None:
    """One row per simple record time with its complete-record flag and gap to the next."""
    times = summary.simple_record_times
    complete = set(summary.complete_record_times)
    frame = pd.DataFrame({
        'record': range(1, len(times) + 1),
        'time': times,
        'complete': [t in complete for t in times],
        'gap': pd.array(list(summary.gaps) + [None], dtype='Int64'),
    })
    frame.to_csv(path, index=False)


def write_samples_csv(samples: np.ndarray, path: Optional[PathLike] = None) -> str:
    """Write an (n, d) array with header x1,...,xd; returns the CSV text."""
    samples = np.atleast_2d(samples)
    columns = [f"x{i + 1}" for i in range(samples.shape[1])]
    frame = pd.DataFrame(samples, columns=columns)
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text


def table_to_csv(rows: Sequence[Dict[str, Any]], path: Optional[PathLike] = None) -> str:
    """CSV text for a list of dict rows (grids, tails, growth tables)."""
    frame = pd.DataFrame([round12(dict(r)) for r in rows])
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text

