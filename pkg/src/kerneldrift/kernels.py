"""Kernel Gram matrices over a window's subseries, plus Nystrom low-rank approximation.

Series are the *columns* of a window matrix, so every Gram matrix is N x N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import Subseries

logger = logging.getLogger(__name__)

KINDS = ("gaussian", "linear", "polynomial", "sigmoid")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its parameters.

    ``degree``/``offset`` apply to the polynomial kernel, ``slope``/``offset``
    to the sigmoid kernel; the gaussian bandwidth is always the window's
    maximal pairwise distance.
    """

    kind: str = "gaussian"
    degree: int = 2
    offset: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel family {self.kind!r}; expected one of {KINDS}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"polynomial degree must be an integer >= 1, got {self.degree}")
        if not (np.isfinite(self.offset) and np.isfinite(self.slope)):
            raise ValueError("kernel offset and slope must be finite")


@dataclass(frozen=True)
class GramMatrix:
    k: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        k = np.array(self.k, dtype=np.float64)
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @property
    def N(self) -> int:
        return self.k.shape[0]


def _columns(sub) -> np.ndarray:
    x = sub.values if isinstance(sub, Subseries) else np.asarray(sub, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("window must be a 2-D (w x N) matrix")
    return x


def gram_gaussian(sub) -> GramMatrix:
    """exp(-||S_i - S_j||^2 / d_max^2) with d_max the largest pairwise distance in the window."""
    x = _columns(sub)
    if x.shape[1] < 2:
        raise ValueError("gaussian Gram needs at least 2 series")
    d2 = squareform(pdist(x.T, "sqeuclidean"))
    d2_max = d2.max()
    if d2_max <= 0.0:
        logger.warning("degenerate window: all %d subseries identical; using all-ones Gram", x.shape[1])
        return GramMatrix(np.ones_like(d2), "gaussian", {"d_max": 0.0}, degenerate=True)
    k = np.exp(-d2 / d2_max)
    return GramMatrix(k, "gaussian", {"d_max": float(np.sqrt(d2_max))})


def gram_alternative(sub, kind: str, degree: int = 2, offset: float = 0.0,
                     slope: float = 1.0) -> GramMatrix:
    """Linear, polynomial or sigmoid Gram matrix (the sigmoid one is generally indefinite)."""
    spec = KernelSpec(kind, degree, offset, slope)
    x = _columns(sub)
    inner = x.T @ x
    if kind == "linear":
        k = inner
        params = {}
    elif kind == "polynomial":
        k = (inner + offset) ** int(degree)
        params = {"degree": int(degree), "offset": offset}
    elif kind == "sigmoid":
        k = np.tanh(slope * inner + offset)
        params = {"slope": slope, "offset": offset}
    else:
        raise ValueError(f"{kind!r} is not an alternative kernel family")
    k = 0.5 * (k + k.T)
    return GramMatrix(k, spec.kind, params)


def gram(sub, spec: Optional[KernelSpec] = None) -> GramMatrix:
    spec = spec or KernelSpec()
    if spec.kind == "gaussian":
        return gram_gaussian(sub)
    return gram_alternative(sub, spec.kind, spec.degree, spec.offset, spec.slope)


def _cross_kernel(x: np.ndarray, cols: np.ndarray, spec: KernelSpec, d2_max: float) -> np.ndarray:
    """Kernel between every series and the prototype columns (N x m)."""
    xs = x.T
    ps = x[:, cols].T
    if spec.kind == "gaussian":
        d2 = (np.sum(xs ** 2, axis=1)[:, None] + np.sum(ps ** 2, axis=1)[None, :] - 2 * xs @ ps.T)
        np.maximum(d2, 0.0, out=d2)
        if d2_max <= 0.0:
            return np.ones_like(d2)
        return np.exp(-d2 / d2_max)
    inner = xs @ ps.T
    if spec.kind == "linear":
        return inner
    if spec.kind == "polynomial":
        return (inner + spec.offset) ** int(spec.degree)
    return np.tanh(spec.slope * inner + spec.offset)


def nystrom_approximate(sub, prototype_indices: Sequence[int],
                        spec: Optional[KernelSpec] = None,
                        ridge_scale: float = 1e-8) -> GramMatrix:
    """Low-rank Gram approximation K_nm (K_mm + ridge I)^-1 K_nm^T.

    The ridge is ``ridge_scale * trace(K_mm) / m``. For the gaussian family the
    bandwidth is the full window's maximal pairwise distance, so the result is
    comparable to the exact Gram matrix.
    """
    spec = spec or KernelSpec()
    x = _columns(sub)
    idx = np.asarray(list(prototype_indices), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("Nystrom approximation needs at least one prototype")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("prototype indices must be distinct")
    if idx.min() < 0 or idx.max() >= x.shape[1]:
        raise ValueError("prototype index out of range")
    d2_max = float(pdist(x.T, "sqeuclidean").max()) if spec.kind == "gaussian" else 0.0
    k_nm = _cross_kernel(x, idx, spec, d2_max)
    k_mm = k_nm[idx]
    k_mm = 0.5 * (k_mm + k_mm.T)
    m = idx.size
    ridge = ridge_scale * np.trace(k_mm) / m
    # lstsq keeps an indefinite (sigmoid) K_mm usable
    sol = np.linalg.lstsq(k_mm + ridge * np.eye(m), k_nm.T, rcond=None)[0]
    approx = k_nm @ sol
    approx = 0.5 * (approx + approx.T)
    return GramMatrix(approx, spec.kind, {"prototypes": idx.tolist(), "ridge": ridge})


def random_prototypes(n: int, m: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def centroid_prototypes(x: np.ndarray, centroids: np.ndarray, m: int, seed: int = 0) -> np.ndarray:
    """Prototype series nearest each concept centroid, padded with random series up to ``m``.

    ``x`` is w x N (series in columns); ``centroids`` is c x w.
    """
    n = x.shape[1]
    chosen: list[int] = []
    if centroids is not None and len(centroids):
        d2 = (np.sum(centroids ** 2, axis=1)[:, None] + np.sum(x ** 2, axis=0)[None, :]
              - 2 * centroids @ x)
        for row in d2:
            for j in np.argsort(row, kind="stable"):
                if int(j) not in chosen:
                    chosen.append(int(j))
                    break
            if len(chosen) >= m:
                break
    if len(chosen) < m:
        rng = np.random.default_rng(seed)
        rest = np.setdiff1d(np.arange(n), chosen)
        chosen.extend(rng.choice(rest, size=m - len(chosen), replace=False).tolist())
    return np.sort(np.asarray(chosen, dtype=np.int64))
