"""Shared constructors for the test suite."""

import numpy as np

from kerneldrift.representation import project_z


def block_z(sizes):
    """Ideal block-diagonal Z: each block filled with 1/size, zero diagonal."""
    n = sum(sizes)
    z = np.zeros((n, n))
    start = 0
    for s in sizes:
        z[start:start + s, start:start + s] = 1.0 / s
        start += s
    np.fill_diagonal(z, 0.0)
    return z


def block_membership(sizes):
    return np.repeat(np.arange(len(sizes)), sizes)


def noisy_block_z(sizes, amplitude, rng):
    """Ideal blocks plus uniform noise in [-amplitude, amplitude], projected back to the feasible set."""
    z = block_z(sizes)
    noise = rng.uniform(-amplitude, amplitude, size=z.shape)
    return project_z(z + noise)


def random_sizes(k, n, rng):
    """Split n into k positive block sizes of at least 2."""
    cuts = np.sort(rng.choice(np.arange(1, n - 2 * k + 1), size=k - 1, replace=True)) if k > 1 else []
    parts = np.diff(np.concatenate([[0], cuts, [n - 2 * k]])).astype(int) + 2
    return [int(p) for p in parts]


def random_feasible_z(n, rng, density=0.6):
    a = rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    return project_z(a)


def psd_gram(n, rng, dim=6):
    x = rng.normal(size=(dim, n))
    d2 = ((x[:, :, None] - x[:, None, :]) ** 2).sum(axis=0)
    return np.exp(-d2 / d2.max())


def brute_psi(labels, p, r, m):
    prefix = list(labels[:p])
    hits = 0
    for a, b in zip(prefix, prefix[1:]):
        if a == r and b == m:
            hits += 1
    return hits / len(prefix) if len(prefix) >= 2 else 0.0


def brute_lam(eta, p, r, m):
    total = 0.0
    for l in range(p - 1):
        x, y = float(eta[r][l]), float(eta[m][l + 1])
        hi = max(x, y)
        total += (min(x, y) / hi) if hi > 0 else 0.0
    return total


def brute_scores(labels, eta, p, k):
    """The switching score matrix evaluated term by term over every intermediate concept."""
    den = 0.0
    for z1 in range(k):
        for z2 in range(k):
            den += brute_psi(labels, p, z1, z2) * brute_lam(eta, p, z1, z2)
    out = [[0.0] * k for _ in range(k)]
    if den == 0:
        return [[1.0 / k ** 2] * k for _ in range(k)], True
    for r in range(k):
        for m in range(k):
            num = 0.0
            for zeta in range(k):
                num += brute_psi(labels, p, r, zeta) * brute_lam(eta, p, zeta, m)
            out[r][m] = num / den
    return out, False
