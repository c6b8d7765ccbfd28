"""
Standard records for pass/fail checks.

Every property check in the package (sandwich, comparison, operator
sampling, ...) returns a CheckReport rather than raising, so that runs
can collect and serialize them.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd


def _to_builtin(value):
    """Converts numpy scalars/arrays (possibly nested) to JSON-ready objects."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class CheckReport:
    """Outcome of a property check.

    Parameters:
    -----------
    name: str
        What was checked, e.g. 'sandwich' or 'uniform_parabolicity'.
    passed: bool
        Whether the check held everywhere it was evaluated.
    worst: float
        The worst observed value of the checked quantity (a violation
        if positive for ordering checks, a margin for sampling checks).
    tolerance: float
        Tolerance the check was evaluated against.
    witness: dict
        Where the worst value was observed (node, level, matrices, ...).
    """
    name: str
    passed: bool
    worst: float
    tolerance: float = 0.0
    witness: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self):
        return _to_builtin({
            'name': self.name,
            'pass': bool(self.passed),
            'worst': self.worst,
            'tolerance': self.tolerance,
            'witness': self.witness,
        })


def summarize(records):
    """Tabulates CheckReports and fit records (anything with `to_dict`
    or plain dicts with 'name'/'quantity' and 'pass') into a tidy
    DataFrame with one row per record.
    """
    rows = []
    for record in records:
        if hasattr(record, 'to_dict'):
            record = record.to_dict()
        rows.append({
            'name': record.get('name', record.get('quantity')),
            'pass': record.get('pass'),
            'worst': record.get('worst', record.get('slope')),
        })

    return pd.DataFrame(rows, columns=['name', 'pass', 'worst'])
