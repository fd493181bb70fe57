"""Deterministic JSON/CSV report writers and their readers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path

import numpy as np


def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj):
    """Sorted keys and repr floats so identical inputs give identical bytes."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, columns):
    """Write equally long columns under ``header``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [list(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header and column count differ")
    if len({len(c) for c in cols}) > 1:
        raise ValueError("columns have different lengths")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])
    return path


def _parse(text):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path):
    """Columns keyed by header; numeric columns come back as float arrays."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        vals = [_parse(r[j]) for r in body]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            out[name] = np.asarray(vals, dtype=float)
        else:
            out[name] = vals
    return out


def finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)
