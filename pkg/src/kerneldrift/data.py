"""Series containers, CSV ingestion, the synthetic SyD benchmark and preprocessing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or out-of-contract input data."""


@dataclass(frozen=True)
class SeriesSet:
    """N co-evolving series of length T, stored as a T x N matrix.

    ``ground_truth`` (synthetic data only) is an N x n_segments integer
    array of generator indices in 1..5.
    """

    values: np.ndarray
    names: tuple = ()
    ground_truth: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("values must be a 2-D (T x N) matrix")
        T, N = values.shape
        if T < 1 or N < 1:
            raise DataError(f"empty series set (T={T}, N={N})")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.names) if len(self.names) else tuple(f"s{i}" for i in range(N))
        if len(names) != N:
            raise DataError(f"{len(names)} names for {N} series")
        object.__setattr__(self, "names", names)
        if self.ground_truth is not None:
            gt = np.array(self.ground_truth, dtype=np.int64)
            gt.setflags(write=False)
            object.__setattr__(self, "ground_truth", gt)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def check_analyzable(self) -> "SeriesSet":
        """Raise unless T >= 2 and N >= 2, the minimum any analysis needs."""
        if self.T < 2 or self.N < 2:
            raise DataError(f"need T >= 2 and N >= 2, got T={self.T}, N={self.N}")
        return self

    def subset(self, columns: Sequence[int]) -> "SeriesSet":
        columns = list(columns)
        gt = None if self.ground_truth is None else self.ground_truth[columns]
        return SeriesSet(self.values[:, columns], tuple(self.names[c] for c in columns), gt)

    def windows(self, w: int) -> list["Subseries"]:
        """Non-overlapping windows of length ``w``; a trailing remainder is dropped."""
        if w < 1:
            raise DataError(f"window size must be >= 1, got {w}")
        b = self.T // w
        return [Subseries(p, self.values[p * w:(p + 1) * w], p * w) for p in range(b)]


@dataclass(frozen=True)
class Subseries:
    """One window of all series. ``window_index`` is 0-based; ``start = window_index * w``."""

    window_index: int
    values: np.ndarray
    start: int = 0

    @property
    def w(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]


def load_csv(path, has_header: bool = False) -> SeriesSet:
    """Read a comma-separated file with one column per series."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    names: tuple = ()
    if has_header:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")
    width = len(names) if names else len(rows[0])
    data = np.empty((len(rows), width), dtype=np.float64)
    first_line = 2 if has_header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}: ragged row {i + first_line}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {cell!r} at row {i + first_line}, column {j + 1}") from None
    return SeriesSet(data, names).check_analyzable()


def save_csv(series: SeriesSet, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.names)
        for row in series.values:
            writer.writerow([repr(float(x)) for x in row])


# Generators evaluated at the within-block integer offset t.
def g1(t):
    return np.cos(4 * np.pi * t / 5) + np.cos(np.pi * (t - 50)) + t / 100


def g2(t):
    return np.sin(np.pi * t / 3 - 3) - np.sin(np.pi * t / 6) + t / 100


def _g34_core(t):
    return np.sin(np.pi * t / 2 - 3) * np.cos(np.pi * (t - 3) / 6) * np.cos(np.pi * (t - 13))


def g3(t):
    return 1 - _g34_core(t) + t / 100


def g4(t):
    return _g34_core(t) + t / 100


def g5(t):
    return np.cos(3 * np.pi * t / 5) + np.sin(2 * np.pi * t / 5 - t) + t / 100


SYD_GENERATORS = (g1, g2, g3, g4, g5)


def generate_syd(n_series: int = 500, n_segments: int = 10, segment_len: int = 78,
                 seed: int = 0) -> SeriesSet:
    """Synthesize the SyD benchmark.

    Every series is ``n_segments`` blocks of ``segment_len`` steps; each block
    is one of five generators picked uniformly at random. Ground truth holds the
    1-based generator index per (series, segment).
    """
    for name, v in (("n_series", n_series), ("n_segments", n_segments), ("segment_len", segment_len)):
        if int(v) != v or v < 1:
            raise DataError(f"{name} must be a positive integer, got {v!r}")
    rng = np.random.default_rng(seed)
    labels = rng.integers(1, 6, size=(n_series, n_segments))
    t = np.arange(segment_len, dtype=np.float64)
    blocks = np.stack([g(t) for g in SYD_GENERATORS])  # (5, segment_len)
    values = blocks[labels - 1].reshape(n_series, n_segments * segment_len).T
    return SeriesSet(np.ascontiguousarray(values), ground_truth=labels)


def syd_block(index: int, segment_len: int = 78) -> np.ndarray:
    """Values of generator ``index`` (1-based) at t = 0..segment_len-1."""
    return SYD_GENERATORS[index - 1](np.arange(segment_len, dtype=np.float64))


def save_ground_truth(series: SeriesSet, path) -> None:
    if series.ground_truth is None:
        raise DataError("series set carries no ground truth")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "segment", "label"])
        n, b = series.ground_truth.shape
        for i in range(n):
            for p in range(b):
                writer.writerow([i, p, int(series.ground_truth[i, p])])


def realized_volatility(closes, period: int) -> np.ndarray:
    """sqrt of the summed squared log-returns over consecutive blocks of ``period`` returns.

    A trailing partial block is dropped.
    """
    closes = np.asarray(closes, dtype=np.float64)
    if period < 1:
        raise DataError(f"period must be >= 1, got {period}")
    if np.any(closes <= 0):
        raise DataError("closing prices must be strictly positive")
    r = np.diff(np.log(closes))
    n = len(r) // period
    return np.sqrt(np.sum(r[:n * period].reshape(n, period) ** 2, axis=1))


def znormalize(values: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Column-wise z-normalization with sample std; flat columns are only centered."""
    x = np.asarray(values, dtype=np.float64)
    centered = x - x.mean(axis=0)
    if x.shape[0] < 2:
        return centered
    std = centered.std(axis=0, ddof=1)
    scale = np.where(std < eps, 1.0, std)
    return centered / scale


def znormalize_window(sub: Subseries) -> Subseries:
    return Subseries(sub.window_index, znormalize(sub.values), sub.start)
