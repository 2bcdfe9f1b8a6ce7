import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from kerneldrift.concepts import (ConceptCatalog, ConceptError, WindowClustering, auto_rho,
                                  estimate_k, merge_into_catalog, spectral_cluster)
from kerneldrift.representation import laplacian

from helpers import block_membership, block_z, noisy_block_z


def test_estimate_k_ideal_three_blocks():
    z = block_z([4, 5, 6])
    est = estimate_k(z)
    assert est.k_hat == 3
    # independent eigen-decomposition oracle
    lam = np.sort(np.linalg.eigvalsh(laplacian(z)))
    assert np.sum(lam < 1e-8) == 3
    np.testing.assert_allclose(est.eigenvalues, np.clip(lam, 0, None), atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 4, 6])
def test_estimate_k_ideal_blocks(k):
    assert estimate_k(block_z([5] * k)).k_hat == k


def test_estimate_k_connected_is_one():
    z = np.full((10, 10), 1 / 9)
    np.fill_diagonal(z, 0)
    assert estimate_k(z).k_hat == 1


def test_estimate_k_errors():
    with pytest.raises(ConceptError):
        estimate_k(np.zeros((2, 2)))
    with pytest.raises(ConceptError):
        estimate_k(block_z([3, 3]), tau_gap=1.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10 ** 6))
def test_estimate_k_noisy_blocks(k, seed):
    z = noisy_block_z([8] * k, 0.01, np.random.default_rng(seed))
    assert estimate_k(z).k_hat == k


def test_estimate_k_gaps_are_exponential():
    z = block_z([3, 4])
    est = estimate_k(z)
    np.testing.assert_allclose(est.gaps, np.diff(np.exp(est.eigenvalues)))


def test_spectral_two_blocks():
    sizes = [6, 9]
    c = spectral_cluster(block_z(sizes), 2, seed=0)
    assert adjusted_rand_score(block_membership(sizes), c.labels) == 1.0


def test_spectral_k_one():
    c = spectral_cluster(block_z([3, 3]), 1)
    assert set(c.labels.tolist()) == {0}


def test_spectral_noisy_four_blocks(rng):
    sizes = [7, 5, 8, 6]
    z = noisy_block_z(sizes, 0.02, rng)
    c = spectral_cluster(z, 4, seed=1)
    assert adjusted_rand_score(block_membership(sizes), c.labels) == 1.0


def test_spectral_labels_canonical_and_deterministic(rng):
    z = noisy_block_z([5, 5, 5], 0.02, rng)
    a = spectral_cluster(z, 3, seed=7)
    b = spectral_cluster(z, 3, seed=7)
    np.testing.assert_array_equal(a.labels, b.labels)
    firsts = [int(np.flatnonzero(a.labels == c)[0]) for c in range(3)]
    assert firsts == sorted(firsts)


def test_spectral_isolated_vertices():
    z = np.zeros((6, 6))
    z[:4, :4] = block_z([2, 2])
    c = spectral_cluster(z, 4, seed=0)
    assert c.k == 4
    assert len({c.labels[4], c.labels[5]}) == 2


def test_spectral_centroids():
    sizes = [3, 4]
    values = np.random.default_rng(0).normal(size=(5, 7))
    c = spectral_cluster(block_z(sizes), 2, values=values)
    np.testing.assert_allclose(c.centroids[0], values[:, :3].mean(axis=1))
    np.testing.assert_allclose(c.centroids[1], values[:, 3:].mean(axis=1))


def test_auto_rho():
    cents = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    # squared distances 1, 4, 5 -> median 4
    assert auto_rho(cents) == 2.0
    assert auto_rho(np.zeros((1, 11))) == 5.0


def clustering(window, centroids):
    centroids = np.asarray(centroids, dtype=float)
    labels = np.arange(len(centroids))
    return WindowClustering(window, labels, centroids)


def test_catalog_bootstrap_and_idempotent():
    cl = clustering(0, [[0, 0], [5, 0], [0, 5]])
    cat = merge_into_catalog(ConceptCatalog(1.0), cl)
    assert cat.size == 3
    again = merge_into_catalog(cat, clustering(1, [[0, 0], [5, 0], [0, 5]]))
    assert again.size == 3
    assert cat.size == 3 and (1, 0) not in cat.window_map


def test_catalog_matches_within_rho():
    cat = merge_into_catalog(ConceptCatalog(1.0), clustering(0, [[0, 0], [5, 0]]))
    cat = merge_into_catalog(cat, clustering(1, [[4.5, 0.5], [9, 9]]))
    assert cat.window_map[(1, 0)] == 1
    assert cat.window_map[(1, 1)] == 2
    assert cat.first_seen == [0, 0, 1]
    # profiles stay frozen at first sight
    np.testing.assert_array_equal(cat.profiles[1], [5, 0])


def test_catalog_rejects_length_mismatch():
    cat = merge_into_catalog(ConceptCatalog(1.0), clustering(0, [[0, 0]]))
    with pytest.raises(ConceptError):
        merge_into_catalog(cat, clustering(1, [[0, 0, 0]]))


def test_catalog_json_roundtrip():
    cat = merge_into_catalog(ConceptCatalog(0.5), clustering(0, [[0.25, 1], [3, 4]]))
    back = ConceptCatalog.from_json(json.loads(cat.dumps()))
    assert back.rho == cat.rho and back.window_map == cat.window_map
    for a, b in zip(back.profiles, cat.profiles):
        np.testing.assert_array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_catalog_profiles_stay_distinct(seed):
    rng = np.random.default_rng(seed)
    cat = ConceptCatalog(float(rng.uniform(0.1, 2)))
    for p in range(4):
        cat = merge_into_catalog(cat, clustering(p, rng.normal(size=(int(rng.integers(1, 4)), 3))))
    prof = np.array(cat.profiles)
    d2 = ((prof[:, None] - prof[None]) ** 2).sum(-1)
    iu = np.triu_indices(len(prof), 1)
    assert np.all(d2[iu] > cat.rho)
