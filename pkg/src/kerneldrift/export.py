"""Writers for run artifacts: CSV matrices, PGM heatmaps and the JSON run report."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def write_matrix_csv(matrix, path) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",", fmt="%.17g")
    return path


def write_rows_csv(header, rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_trace_csv(trace, path) -> Path:
    return write_rows_csv(["iteration", "value"], [(i, repr(float(v))) for i, v in enumerate(trace)], path)


def heatmap_bytes(z, labels) -> bytes:
    """8-bit binary PGM of Z with series reordered by label, scaled linearly from [0, max Z]."""
    z = np.asarray(z, dtype=np.float64)
    order = np.argsort(np.asarray(labels), kind="stable")
    z = z[np.ix_(order, order)]
    top = z.max()
    scaled = np.zeros_like(z) if top <= 0 else np.clip(z, 0.0, None) / top
    pixels = np.rint(scaled * 255).astype(np.uint8)
    n = z.shape[0]
    return b"P5\n%d %d\n255\n" % (n, n) + pixels.tobytes()


def write_heatmap(z, labels, path) -> Path:
    path = Path(path)
    path.write_bytes(heatmap_bytes(z, labels))
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    width, height = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)


def write_json(doc, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
