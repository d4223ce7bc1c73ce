"""Deterministic file formats: CSV (RFC 4180), binary PGM, sorted-key JSON.

Every writer produces byte-identical output for identical inputs; reals are
formatted with 17 significant digits so round-trips are exact.
"""

from __future__ import annotations

import csv
import hashlib
import json

import numpy as np


def fmt_real(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)  # RFC 4180: CRLF line endings by default
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_real(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_pgm(path, array):
    """8-bit binary PGM (P5), max-normalized, row-major with y increasing
    downward: image row i is lattice row y = i, column j is x = j."""
    a = np.asarray(array, dtype=float)
    mx = a.max()
    img = np.zeros(a.shape, dtype=np.uint8) if mx <= 0 else \
        np.clip(np.round(255.0 * a / mx), 0, 255).astype(np.uint8)
    img = img.T  # (y rows, x columns)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config):
    """Content hash of a run configuration (canonical JSON)."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"),
                      default=_canon)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _canon(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return fmt_real(obj)
    raise TypeError(f"unhashable config value {obj!r}")
