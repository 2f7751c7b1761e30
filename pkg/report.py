"""
Reports
Verdicts, the per-command report and its byte-stable JSON / CSV emission
"""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from logging_config import get_logger
from utils import sanitize_filename

logger = get_logger(__name__)

VERSION = '0.1.0'
REPORT_FILE = 'report.json'


class Status(str, Enum):
    PASS = 'pass'
    FAIL = 'fail'
    INDETERMINATE = 'indeterminate'


def _jsonable(value: Any) -> Any:
    """numpy scalars/arrays and complex numbers as plain JSON values"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'to_dict'):
        return _jsonable(value.to_dict())
    return value


@dataclass
class Verdict:
    """One named check: measured against expected within a tolerance"""
    name: str
    status: Status
    measured: Any
    expected: Any
    tolerance: Any = None
    module: str = ''
    note: str = ''

    @classmethod
    def at_most(cls, name: str, measured: float, limit: float, module: str = '', note: str = '') -> 'Verdict':
        """measured <= limit; the limit is also the tolerance"""
        if measured is None or not np.isfinite(measured):
            return cls(name, Status.INDETERMINATE, measured, 0.0, limit, module, note)
        status = Status.PASS if measured <= limit else Status.FAIL
        return cls(name, status, measured, 0.0, limit, module, note)

    @classmethod
    def close_to(cls, name: str, measured: Optional[float], expected: float, tolerance: float,
                 module: str = '', note: str = '') -> 'Verdict':
        if measured is None:
            return cls(name, Status.INDETERMINATE, None, expected, tolerance, module, note)
        status = Status.PASS if abs(measured - expected) <= tolerance else Status.FAIL
        return cls(name, status, measured, expected, tolerance, module, note)

    @classmethod
    def flag(cls, name: str, value: Optional[bool], expected: bool = True, module: str = '',
             note: str = '') -> 'Verdict':
        """Boolean check; None means the check could not be decided"""
        if value is None:
            return cls(name, Status.INDETERMINATE, None, expected, None, module, note)
        status = Status.PASS if bool(value) == expected else Status.FAIL
        return cls(name, status, bool(value), expected, None, module, note)

    @classmethod
    def indeterminate(cls, name: str, note: str, module: str = '', expected: Any = None) -> 'Verdict':
        return cls(name, Status.INDETERMINATE, None, expected, None, module, note)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'status': self.status.value,
            'measured': _jsonable(self.measured),
            'expected': _jsonable(self.expected),
            'tolerance': _jsonable(self.tolerance),
            'module': self.module,
            'note': self.note,
        }


@dataclass
class Curve:
    """Plot data written as its own CSV file"""
    name: str
    columns: List[str]
    rows: List[Dict[str, Any]]


@dataclass
class Report:
    command: str
    config: Dict[str, Any]
    seed: int
    results: Dict[str, Any] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    curves: List[Curve] = field(default_factory=list)
    error: Optional[Dict[str, Any]] = None
    version: str = VERSION

    def add(self, *verdicts: Verdict) -> None:
        self.verdicts.extend(verdicts)

    def extend(self, other: 'Report') -> None:
        """Fold a sub-report in under its command name"""
        self.results[other.command] = other.results
        self.verdicts.extend(other.verdicts)
        self.curves.extend(other.curves)

    @property
    def status(self) -> Status:
        if self.error is not None or any(v.status == Status.FAIL for v in self.verdicts):
            return Status.FAIL
        if any(v.status == Status.INDETERMINATE for v in self.verdicts):
            return Status.INDETERMINATE
        return Status.PASS

    def summary(self) -> Dict[str, int]:
        counts = {s.value: 0 for s in Status}
        for verdict in self.verdicts:
            counts[verdict.status.value] += 1
        return counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': _jsonable(self.config),
            'seed': self.seed,
            'version': self.version,
            'status': self.status.value,
            'summary': self.summary(),
            'results': _jsonable(self.results),
            'verdicts': [v.to_dict() for v in self.verdicts],
            'curves': [f"{sanitize_filename(c.name)}.csv" for c in self.curves],
            'error': self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    """Header row plus one line per row, RFC-4180 quoting and CRLF line ends"""
    path = Path(path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), quoting=csv.QUOTE_MINIMAL,
                                lineterminator='\r\n', extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
    return path


def _csv_cell(value: Any) -> Any:
    value = _jsonable(value)
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def write_report(report: Report, output_dir: Union[str, Path]) -> List[Path]:
    """report.json plus one CSV per curve; returns the written paths"""
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create output directory {output_dir}: {e}") from e

    written = []
    report_path = output_dir / REPORT_FILE
    with open(report_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(report.to_json())
    written.append(report_path)
    for curve in report.curves:
        written.append(write_csv(output_dir / f"{sanitize_filename(curve.name)}.csv", curve.columns, curve.rows))
    logger.info(f"Wrote {len(written)} report files to {output_dir}")
    return written
