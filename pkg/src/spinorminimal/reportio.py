"""JSON report serialization: complex numbers as [re, im], arrays as lists.

Reports are diffable fixtures: keys are sorted, no timestamps, and the
same inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "spinor-minimal/1"

__all__ = ["jsonify", "write_report", "SCHEMA"]


def jsonify(obj):
    """Recursively convert to JSON-ready values; complex -> [re, im]."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonify(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        re = math.inf if math.isinf(z.real) else z.real
        return [re, z.imag]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_report(payload: dict, path) -> Path:
    """Write a schema-stamped, sorted-keys JSON report."""
    path = Path(path)
    body = {"schema": SCHEMA}
    body.update(jsonify(payload))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")
    return path
