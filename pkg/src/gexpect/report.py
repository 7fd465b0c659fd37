"""Canonical JSON, content hashes and run-directory persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def canonical_json(obj) -> str:
    """Key-sorted JSON with ``repr`` round-trip floats; stable across runs."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def content_hash(obj, length=16) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:length]


def write_json(path, obj):
    Path(path).write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")


def write_csv(path, header, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
