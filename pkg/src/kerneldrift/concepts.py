"""Concept counting, per-window spectral clustering and the cross-window concept catalog."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from .representation import RepresentationMatrix, laplacian


class ConceptError(ValueError):
    pass


@dataclass(frozen=True)
class ConceptEstimate:
    k_hat: int
    eigenvalues: np.ndarray
    gaps: np.ndarray


def _z(z) -> np.ndarray:
    return z.z if isinstance(z, RepresentationMatrix) else np.asarray(z, dtype=np.float64)


def estimate_k(z, tau_gap: float = 0.2) -> ConceptEstimate:
    """Number of concepts from the exponential eigengap exp(lambda_{i+1}) - exp(lambda_i) of L_Z.

    The estimate is the position of the largest gap among i = 1..max(1, N//2),
    provided that gap exceeds ``tau_gap``; otherwise the window holds a single
    concept. The search stops at N//2 because exponentiation inflates gaps
    between the large eigenvalues, which carry no component information.
    """
    if not 0 < tau_gap < 1:
        raise ConceptError(f"tau_gap must lie in (0, 1), got {tau_gap}")
    z = _z(z)
    n = z.shape[0]
    if n < 3:
        raise ConceptError(f"concept estimation needs N >= 3 series, got {n}")
    lam = np.clip(scipy.linalg.eigvalsh(laplacian(z)), 0.0, None)
    gaps = np.diff(np.exp(lam))
    head = gaps[:max(1, n // 2)]
    i = int(np.argmax(head))
    k_hat = i + 1 if head[i] > tau_gap else 1
    return ConceptEstimate(k_hat, lam, gaps)


@dataclass(frozen=True)
class WindowClustering:
    window_index: int
    labels: np.ndarray
    centroids: np.ndarray  # k x w, row r is the mean member subseries of cluster r

    @property
    def k(self) -> int:
        return len(self.centroids)


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters 0..k-1 by first appearance."""
    order: dict[int, int] = {}
    for lab in labels:
        order.setdefault(int(lab), len(order))
    return np.array([order[int(lab)] for lab in labels], dtype=np.int64)


def _embed_kmeans(a: np.ndarray, k: int, seed: int, n_init: int) -> np.ndarray:
    n = a.shape[0]
    if k == 1:
        return np.zeros(n, dtype=np.int64)
    if k >= n:
        return np.arange(n, dtype=np.int64)
    d = a.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    m = inv[:, None] * a * inv[None, :]
    _, u = scipy.linalg.eigh(m, subset_by_index=[n - k, n - 1])
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    u = u / np.where(norms > 0, norms, 1.0)
    km = KMeans(n_clusters=k, n_init=n_init, random_state=seed, init="k-means++")
    return km.fit_predict(u).astype(np.int64)


def spectral_cluster(z, k: int, seed: int = 0, values: Optional[np.ndarray] = None,
                     window_index: int = 0, n_init: int = 20) -> WindowClustering:
    """Ng-Jordan-Weiss spectral clustering on the affinity (Z + Z^T) / 2.

    Series with an all-zero affinity row become singleton clusters first. When
    they alone would use up all ``k`` clusters, they are pooled into one.
    ``values`` (w x N) yields the cluster centroids; without it centroids are empty.
    """
    a = _z(z)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ConceptError(f"k must lie in [1, {n}], got {k}")
    isolated = np.flatnonzero(a.sum(axis=1) <= 0.0)
    active = np.setdiff1d(np.arange(n), isolated)
    labels = np.empty(n, dtype=np.int64)
    if k == 1:
        labels[:] = 0
    elif isolated.size == 0:
        labels[:] = _embed_kmeans(a, k, seed, n_init)
    elif isolated.size < k and active.size >= k - isolated.size:
        sub = _embed_kmeans(a[np.ix_(active, active)], k - isolated.size, seed, n_init)
        labels[active] = sub
        labels[isolated] = (k - isolated.size) + np.arange(isolated.size)
    else:
        labels[isolated] = k - 1
        if active.size:
            sub = _embed_kmeans(a[np.ix_(active, active)], min(k - 1, active.size), seed, n_init)
            labels[active] = sub
    labels = _canonical(labels)
    if values is not None:
        values = np.asarray(values, dtype=np.float64)
        centroids = np.stack([values[:, labels == c].mean(axis=1) for c in range(labels.max() + 1)])
    else:
        centroids = np.zeros((labels.max() + 1, 0))
    return WindowClustering(window_index, labels, centroids)


def auto_rho(centroids: np.ndarray, scale: float = 0.5) -> float:
    """``scale`` times the median pairwise squared distance between centroids.

    With fewer than two centroids there is no distance to take; the fallback is
    ``scale * (w - 1)``, half the squared norm of a z-normalized window.
    """
    c = np.asarray(centroids, dtype=np.float64)
    if len(c) < 2:
        return scale * max(c.shape[1] - 1, 1)
    d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(len(c), 1)
    return float(scale * np.median(d2[iu]))


@dataclass
class ConceptCatalog:
    """Global concept profiles, frozen at first sight, pairwise more than ``rho`` apart."""

    rho: float
    profiles: list = field(default_factory=list)
    first_seen: list = field(default_factory=list)
    window_map: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.profiles)

    @property
    def window_length(self) -> Optional[int]:
        return len(self.profiles[0]) if self.profiles else None

    def copy(self) -> "ConceptCatalog":
        return ConceptCatalog(self.rho, list(self.profiles), list(self.first_seen), dict(self.window_map))

    def global_labels(self, clustering: WindowClustering) -> np.ndarray:
        lookup = np.array([self.window_map[(clustering.window_index, c)] for c in range(clustering.k)])
        return lookup[clustering.labels]

    def to_json(self) -> dict:
        return {
            "rho": self.rho,
            "profiles": [{"id": i, "first_seen": int(f), "vector": [float(v) for v in p]}
                         for i, (p, f) in enumerate(zip(self.profiles, self.first_seen))],
            "window_map": [{"window": int(w), "local": int(c), "concept": int(g)}
                           for (w, c), g in sorted(self.window_map.items())],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ConceptCatalog":
        profiles = [np.asarray(p["vector"], dtype=np.float64) for p in doc["profiles"]]
        first_seen = [int(p["first_seen"]) for p in doc["profiles"]]
        window_map = {(int(e["window"]), int(e["local"])): int(e["concept"]) for e in doc["window_map"]}
        return cls(float(doc["rho"]), profiles, first_seen, window_map)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def merge_into_catalog(catalog: ConceptCatalog, clustering: WindowClustering) -> ConceptCatalog:
    """Map each local cluster to the nearest profile within ``rho`` or spawn a new profile.

    Returns a new catalog; the input is left untouched.
    """
    out = catalog.copy()
    wl = out.window_length
    if wl is not None and clustering.centroids.shape[1] != wl:
        raise ConceptError(
            f"window length {clustering.centroids.shape[1]} does not match catalog profiles ({wl})")
    for c, centroid in enumerate(clustering.centroids):
        best, best_d2 = -1, np.inf
        for g, prof in enumerate(out.profiles):
            d2 = float(np.sum((centroid - prof) ** 2))
            if d2 < best_d2:
                best, best_d2 = g, d2
        if best >= 0 and best_d2 <= out.rho:
            out.window_map[(clustering.window_index, c)] = best
        else:
            out.profiles.append(np.array(centroid, dtype=np.float64))
            out.first_seen.append(clustering.window_index)
            out.window_map[(clustering.window_index, c)] = len(out.profiles) - 1
    return out
