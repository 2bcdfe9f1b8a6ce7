"""Concept trajectories, transition scores between consecutive windows, and value forecasts.

Window indices are 1-based in the public functions (``p`` counts analyzed
windows); trajectories and occupancy tables are stored 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class DriftError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    series_index: int
    labels: tuple

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class TransitionScores:
    psi: np.ndarray
    lam: np.ndarray
    prob: np.ndarray
    fallback: bool
    predictions: np.ndarray  # predicted next concept for every current concept r


@dataclass(frozen=True)
class Forecast:
    series_index: int
    predicted_concept: int
    predicted_values: np.ndarray
    weights: np.ndarray
    windows: tuple  # 0-based windows carrying the weights
    fallback: bool = False


def build_trajectories(window_labels: Sequence[np.ndarray]) -> list[Trajectory]:
    """One trajectory per series from per-window global labels (one array of length N per window)."""
    if not len(window_labels):
        raise DriftError("no windows to build trajectories from")
    for p, lab in enumerate(window_labels):
        if lab is None:
            raise DriftError(f"missing clustering for window {p}")
    table = np.stack([np.asarray(lab, dtype=np.int64) for lab in window_labels], axis=1)
    return [Trajectory(i, tuple(int(c) for c in row)) for i, row in enumerate(table)]


def trajectory_table(trajectories: Sequence[Trajectory]) -> np.ndarray:
    return np.array([t.labels for t in trajectories], dtype=np.int64)


def occupancy(table: np.ndarray, k: int) -> np.ndarray:
    """eta[c, l]: number of series exhibiting concept c at window l (k x b)."""
    table = np.asarray(table, dtype=np.int64)
    eta = np.zeros((k, table.shape[1]), dtype=np.int64)
    for l in range(table.shape[1]):
        eta[:, l] = np.bincount(table[:, l], minlength=k)[:k]
    return eta


def psi(labels: Sequence[int], p: int, r: int, m: int) -> float:
    """Share of adjacent (r, m) pairs in the first ``p`` labels, relative to the prefix length."""
    if p < 1:
        raise DriftError(f"p must be >= 1, got {p}")
    prefix = np.asarray(labels[:p], dtype=np.int64)
    if prefix.size < 2:
        return 0.0
    hits = np.count_nonzero((prefix[:-1] == r) & (prefix[1:] == m))
    return hits / prefix.size


def psi_matrix(labels: Sequence[int], p: int, k: int) -> np.ndarray:
    prefix = np.asarray(labels[:p], dtype=np.int64)
    out = np.zeros((k, k))
    if prefix.size < 2:
        return out
    np.add.at(out, (prefix[:-1], prefix[1:]), 1.0)
    return out / prefix.size


def _ratio(a, b):
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    return np.divide(lo, hi, out=np.zeros(np.broadcast(a, b).shape, dtype=np.float64), where=hi > 0)


def lam(eta: np.ndarray, p: int, r: int, m: int) -> float:
    """Sum over l = 1..p-1 of min/max of eta(r, W_l) and eta(m, W_{l+1}); 0/0 counts as 0."""
    if p < 2:
        raise DriftError(f"p must be >= 2, got {p}")
    eta = np.asarray(eta, dtype=np.float64)
    return float(np.sum(_ratio(eta[r, :p - 1], eta[m, 1:p])))


def lambda_matrix(eta: np.ndarray, p: int) -> np.ndarray:
    if p < 2:
        raise DriftError(f"p must be >= 2, got {p}")
    eta = np.asarray(eta, dtype=np.float64)
    a = eta[:, None, :p - 1]
    b = eta[None, :, 1:p]
    return _ratio(a, b).sum(axis=-1)


def transition_scores(labels: Sequence[int], eta: np.ndarray, p: int,
                      k: Optional[int] = None) -> TransitionScores:
    """Switching scores P(r -> m) = sum_z Psi[r, z] Lambda[z, m] / sum Psi * Lambda.

    Scores are not normalized per row. A zero denominator yields the uniform
    matrix 1/k^2 with ``fallback`` set. Predictions take the argmax over m,
    breaking ties by the larger occupancy at window p, then by the lower id.
    """
    eta = np.asarray(eta)
    k = eta.shape[0] if k is None else k
    if p < 2:
        raise DriftError(f"p must be >= 2, got {p}")
    ps = psi_matrix(labels, p, k)
    la = lambda_matrix(eta, p)
    den = float(np.sum(ps * la))
    if den > 0:
        prob = (ps @ la) / den
        fallback = False
    else:
        prob = np.full((k, k), 1.0 / k ** 2)
        fallback = True
    occ = eta[:, p - 1].astype(np.float64)
    preds = np.array([_select(prob[r], occ) for r in range(k)], dtype=np.int64)
    return TransitionScores(ps, la, prob, fallback, preds)


def _select(row: np.ndarray, occ: np.ndarray, rtol: float = 1e-12) -> int:
    best = row.max()
    # scores equal up to summation-order rounding count as ties
    tied = np.flatnonzero(row >= best - rtol * abs(best))
    if tied.size == 1:
        return int(tied[0])
    top = occ[tied].max()
    return int(tied[occ[tied] == top][0])


def forecast_weights(labels: Sequence[int], p: int, m: int, tau_decay: float = 0.5):
    """Normalized tau^(p-l+1) weights over the windows l <= p where the series showed ``m``."""
    if not 0 < tau_decay < 1:
        raise DriftError(f"tau_decay must lie in (0, 1), got {tau_decay}")
    hits = [l for l in range(p) if labels[l] == m]
    if not hits:
        return (), np.zeros(0)
    # 0-based l maps to exponent p - (l + 1) + 1 = p - l
    raw = np.array([tau_decay ** (p - l) for l in hits])
    return tuple(hits), raw / raw.sum()


def forecast_values(labels: Sequence[int], history: np.ndarray, m: int,
                    tau_decay: float = 0.5, profile: Optional[np.ndarray] = None,
                    series_index: int = 0) -> Forecast:
    """Forecast the next window of one series under predicted concept ``m``.

    ``history`` is p x w, row l holding the series' subseries in window l.
    If the series never exhibited ``m``, the concept ``profile`` is rescaled
    to the mean and standard deviation of the most recent window.
    """
    history = np.asarray(history, dtype=np.float64)
    p = history.shape[0]
    if len(labels) < p:
        raise DriftError("trajectory shorter than history")
    windows, weights = forecast_weights(labels, p, m, tau_decay)
    if windows:
        values = weights @ history[list(windows)]
        return Forecast(series_index, int(m), values, weights, windows, False)
    if profile is None:
        raise DriftError(f"series {series_index} never exhibited concept {m} and no profile was given")
    last = history[-1]
    prof = np.asarray(profile, dtype=np.float64)
    sd = prof.std()
    shape = (prof - prof.mean()) / sd if sd > 1e-12 else prof - prof.mean()
    values = shape * last.std() + last.mean()
    return Forecast(series_index, int(m), values, np.zeros(0), (), True)


def evaluate_rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape or predicted.size < 1:
        raise DriftError(f"shape mismatch: {predicted.shape} vs {actual.shape}")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))
