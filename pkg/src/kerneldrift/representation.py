"""Kernel self-representation with a block-diagonal regularizer.

Minimizes, by block coordinate descent over {W, V} and Z,

    1/2 Tr(K + V^T K V) - alpha Tr(K V) + beta/2 ||V - Z||^2 + gamma <Diag(Z 1) - Z, W>

subject to Z = Z^T >= 0, diag(Z) = 0, 0 <= W <= I, Tr(W) = k. Every block
update is an exact minimizer, so the objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import GramMatrix


class NumericalError(ArithmeticError):
    """Non-finite values appeared during a solve."""


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 4.0
    beta: float = 60.0
    gamma: float = 0.8
    k: int = 3
    max_iter: int = 200
    tol: float = 1e-5

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.gamma > 0):
            raise ValueError("alpha, beta and gamma must be positive")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ValueError("max_iter must be a non-negative integer")


@dataclass(frozen=True)
class RepresentationMatrix:
    z: np.ndarray
    objective_trace: tuple = ()
    iterations: int = 0
    converged: bool = False

    @property
    def N(self) -> int:
        return self.z.shape[0]


@dataclass
class SolverState:
    v: np.ndarray
    w: np.ndarray


def _as_array(z) -> np.ndarray:
    return z.z if isinstance(z, RepresentationMatrix) else np.asarray(z, dtype=np.float64)


def _gram_array(gram) -> np.ndarray:
    return gram.k if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)


def laplacian(z) -> np.ndarray:
    """L_Z = Diag(Z 1) - Z."""
    z = _as_array(z)
    return np.diag(z.sum(axis=1)) - z


def _smallest_eigh(a: np.ndarray, k: int):
    n = a.shape[0]
    return scipy.linalg.eigh(a, subset_by_index=[0, min(k, n) - 1], driver="evr")


def block_diag_penalty(z, k: int) -> float:
    """Sum of the k smallest eigenvalues of L_Z; zero iff Z has at least k connected components."""
    lap = laplacian(z)
    n = lap.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    vals = scipy.linalg.eigh(lap, eigvals_only=True, subset_by_index=[0, k - 1])
    return float(max(vals.sum(), 0.0))


def update_w(z, k: int, split_ties: bool = False, tie_tol: float = 1e-9) -> np.ndarray:
    """Minimizer of <L_Z, W> over 0 <= W <= I, Tr(W) = k.

    By default the projector onto the eigenvectors of the k smallest
    eigenvalues of L_Z. With ``split_ties`` and lambda_k tied with
    lambda_{k+1}, the tied eigenspace instead gets a uniform fractional
    weight; this is still a minimizer and, unlike an arbitrary eigenbasis, a
    spectral function of L_Z (hence permutation-equivariant).
    """
    lap = laplacian(z)
    n = lap.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not split_ties or k == n:
        _, u = _smallest_eigh(lap, k)
        return u @ u.T
    vals, u = _smallest_eigh(lap, k + 1)
    scale = tie_tol * max(1.0, float(np.abs(np.diag(lap)).max()))
    if vals[k] - vals[k - 1] > scale:
        u = u[:, :k]
        return u @ u.T
    vals, u = scipy.linalg.eigh(lap)
    tied = np.abs(vals - vals[k - 1]) <= scale
    below = (vals < vals[k - 1]) & ~tied
    n_below = int(below.sum())
    weight = (k - n_below) / int(tied.sum())
    ub = u[:, below]
    ut = u[:, tied]
    return ub @ ub.T + weight * (ut @ ut.T)


class _VSolver:
    """Cached factorization of K + beta I; both stay fixed during one solve.

    Cholesky for the usual PSD Gram matrix, LU when an indefinite (sigmoid)
    kernel makes K + beta I lose definiteness.
    """

    def __init__(self, k: np.ndarray, alpha: float, beta: float):
        if not np.all(np.isfinite(k)):
            raise NumericalError("Gram matrix has non-finite entries")
        n = k.shape[0]
        self.beta = beta
        self.rhs0 = alpha * k
        a = k + beta * np.eye(n)
        try:
            self.factor = scipy.linalg.cho_factor(a, lower=True)
            self.solve = scipy.linalg.cho_solve
        except scipy.linalg.LinAlgError:
            self.factor = scipy.linalg.lu_factor(a)
            self.solve = scipy.linalg.lu_solve

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.solve(self.factor, self.rhs0 + self.beta * z)


def update_v(gram, z, alpha: float, beta: float) -> np.ndarray:
    """V = (K + beta I)^-1 (alpha K + beta Z)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    k = _gram_array(gram)
    z = _as_array(z)
    if not np.all(np.isfinite(z)):
        raise NumericalError("Z has non-finite entries")
    return _VSolver(k, alpha, beta)(z)


def project_z(a) -> np.ndarray:
    """Nearest (Frobenius) symmetric, non-negative, zero-diagonal matrix to ``a``."""
    a = np.array(a, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    z = 0.5 * (a + a.T)
    np.maximum(z, 0.0, out=z)
    # exact symmetry regardless of rounding in the sum above
    z = np.triu(z, 1)
    return z + z.T


def update_z(v, w, beta: float, gamma: float) -> np.ndarray:
    """Z minimizing beta/2 ||V - Z||^2 + gamma <Diag(Z 1) - Z, W> over the feasible set."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    shift = np.diag(w)[:, None] - w
    return project_z(v - (gamma / beta) * shift)


def objective_value(gram, z, v, w, cfg: SolverConfig) -> float:
    k = _gram_array(gram)
    z = _as_array(z)
    kv = k @ v
    fit = 0.5 * (np.trace(k) + np.sum(v * kv)) - cfg.alpha * np.trace(kv)
    coupling = 0.5 * cfg.beta * np.sum((v - z) ** 2)
    reg = cfg.gamma * np.sum(laplacian(z) * w)
    return float(fit + coupling + reg)


def solve(gram, cfg: SolverConfig = SolverConfig(), z0=None) -> RepresentationMatrix:
    """Alternate W, V (jointly, given Z) and Z until the max-abs change of Z is below ``cfg.tol``.

    The trace records the objective after every Z update, preceded by the value
    at the starting point (W, V updated from Z0).
    """
    k = _gram_array(gram)
    n = k.shape[0]
    if k.shape != (n, n):
        raise ValueError("Gram matrix must be square")
    if not 1 <= cfg.k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {cfg.k}")
    z = np.zeros((n, n)) if z0 is None else project_z(_as_array(z0))
    if cfg.max_iter == 0:
        return RepresentationMatrix(z, (), 0, False)
    vsolve = _VSolver(k, cfg.alpha, cfg.beta)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        w = update_w(z, cfg.k, split_ties=True)
        v = vsolve(z)
        if it == 1:
            trace.append(objective_value(k, z, v, w, cfg))
        z_new = update_z(v, w, cfg.beta, cfg.gamma)
        if not np.all(np.isfinite(z_new)):
            raise NumericalError(f"non-finite Z at iteration {it}")
        trace.append(objective_value(k, z_new, v, w, cfg))
        delta = np.max(np.abs(z_new - z))
        z = z_new
        if delta <= cfg.tol:
            converged = True
            break
    z.setflags(write=False)
    return RepresentationMatrix(z, tuple(trace), it, converged)
