import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kerneldrift.drift import (DriftError, build_trajectories, evaluate_rmse, forecast_values,
                               forecast_weights, lam, lambda_matrix, occupancy, psi, psi_matrix,
                               trajectory_table, transition_scores)

from helpers import brute_lam, brute_psi, brute_scores

A, B = 0, 1


def test_psi_examples():
    assert psi([A, B, A, B], 4, A, B) == 0.5
    assert psi([A], 1, A, B) == 0.0
    assert psi([A, A, A], 3, A, A) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(DriftError):
        psi([A], 0, A, A)


def test_lambda_examples():
    eta = np.array([[3, 0], [0, 3]])
    assert lam(eta, 2, 0, 1) == 1.0
    eta = np.array([[0, 0], [0, 5]])
    assert lam(eta, 2, 0, 1) == 0.0
    with pytest.raises(DriftError):
        lam(eta, 1, 0, 1)


def test_lambda_random_matches_loop(rng):
    eta = rng.integers(0, 6, size=(3, 5))
    mat = lambda_matrix(eta, 4)
    for r in range(3):
        for m in range(3):
            assert abs(mat[r, m] - brute_lam(eta, 4, r, m)) < 1e-12
            assert abs(lam(eta, 4, r, m) - brute_lam(eta, 4, r, m)) < 1e-12


def test_trajectories_and_occupancy():
    trs = build_trajectories([np.array([0, 1, 1]), np.array([2, 1, 0])])
    assert [t.labels for t in trs] == [(0, 2), (1, 1), (1, 0)]
    table = trajectory_table(trs)
    np.testing.assert_array_equal(occupancy(table, 3), [[1, 1], [2, 1], [0, 1]])
    assert len(build_trajectories([np.array([0, 1])])[0]) == 1
    with pytest.raises(DriftError):
        build_trajectories([np.array([0]), None])


def test_scores_k_one():
    labels = [0, 0, 0]
    eta = np.array([[4, 4, 4]])
    s = transition_scores(labels, eta, 3)
    assert s.predictions.tolist() == [0]


def test_scores_hand_two_concepts():
    labels = [0, 1, 1, 0]
    eta = np.array([[3, 1, 2, 4], [1, 3, 2, 0]])
    s = transition_scores(labels, eta, 4)
    oracle, fb = brute_scores(labels, eta, 4, 2)
    assert not fb and not s.fallback
    np.testing.assert_allclose(s.prob, oracle, rtol=0, atol=1e-12)


def test_scores_fallback():
    # a constant trajectory only ever pairs (0, 0), and concept 0 vanishes after window 1
    s = transition_scores([0, 0], np.array([[2, 0], [0, 2]]), 2)
    assert s.fallback
    np.testing.assert_allclose(s.prob, 0.25)
    assert brute_scores([0, 0], np.array([[2, 0], [0, 2]]), 2, 2)[1]


def scenario(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    b = int(rng.integers(2, 7))
    n = int(rng.integers(1, 21))
    table = rng.integers(0, k, size=(n, b))
    return k, b, table, occupancy(table, k)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_drift_math_oracle(seed):
    k, b, table, eta = scenario(seed)
    for i in range(min(3, table.shape[0])):
        labels = table[i].tolist()
        for p in range(2, b + 1):
            ps = psi_matrix(labels, p, k)
            la = lambda_matrix(eta, p)
            s = transition_scores(labels, eta, p)
            oracle, fb = brute_scores(labels, eta, p, k)
            for r in range(k):
                for m in range(k):
                    assert abs(ps[r, m] - brute_psi(labels, p, r, m)) < 1e-12
                    assert abs(la[r, m] - brute_lam(eta, p, r, m)) < 1e-12
            np.testing.assert_allclose(s.prob, oracle, rtol=0, atol=1e-12)
            assert s.fallback == fb
            assert np.all((ps >= 0) & (ps <= 1))
            assert np.all((la >= 0) & (la <= p - 1))
            assert np.all(np.isfinite(s.prob)) and np.all(s.prob >= 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 9), st.floats(0.01, 100.0))
def test_prediction_ignores_denominator_scale(seed, scale):
    k, b, table, eta = scenario(seed)
    labels = table[0].tolist()
    s = transition_scores(labels, eta, b)
    if s.fallback:
        return
    raw = s.psi @ s.lam * scale  # denominator-free variant, positively rescaled
    occ = eta[:, b - 1]
    for r in range(k):
        row = raw[r]
        tied = np.flatnonzero(np.isclose(row, row.max(), rtol=1e-12, atol=0))
        best = tied[np.argmax(occ[tied])] if tied.size > 1 else tied[0]
        assert s.predictions[r] == best


def test_prediction_tie_breaks_by_occupancy():
    # lambda(0, 0) = min(2, 1)/2 and lambda(0, 1) = min(2, 4)/4 are both 1/2
    eta = np.array([[2, 1], [0, 4]])
    s = transition_scores([0, 0], eta, 2)
    assert s.prob[0, 0] == s.prob[0, 1]
    assert s.predictions[0] == 1
    # equal occupancy too: lower id wins
    s = transition_scores([0, 0], np.array([[2, 2], [0, 2]]), 2)
    assert s.prob[0, 0] == s.prob[0, 1] and s.predictions[0] == 0


def test_forecast_single_window():
    hist = np.arange(12, dtype=float).reshape(3, 4)
    f = forecast_values([1, 0, 2], hist, 2, 0.5)
    np.testing.assert_array_equal(f.predicted_values, hist[2])
    assert f.weights.tolist() == [1.0]


def test_forecast_two_windows_weights():
    hist = np.array([[0.0, 0.0], [3.0, 3.0], [6.0, 9.0]])
    f = forecast_values([0, 1, 1], hist, 1, 0.5)
    # tau^(p-l+1): l=p-1 -> 0.25, l=p -> 0.5, normalized to 1/3, 2/3
    np.testing.assert_allclose(f.weights, [1 / 3, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(f.predicted_values, [5.0, 7.0])


def test_forecast_fallback_profile():
    hist = np.array([[1.0, 2.0, 3.0], [10.0, 12.0, 14.0]])
    prof = np.array([0.0, 5.0, 10.0])
    f = forecast_values([0, 0], hist, 3, 0.5, profile=prof)
    assert f.fallback
    last = hist[-1]
    np.testing.assert_allclose(f.predicted_values.mean(), last.mean())
    np.testing.assert_allclose(f.predicted_values.std(), last.std())
    with pytest.raises(DriftError):
        forecast_values([0, 0], hist, 3, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=10), st.floats(0.05, 0.95))
def test_forecast_weight_properties(labels, tau):
    p = len(labels)
    wins, w = forecast_weights(labels, p, labels[-1], tau)
    assert abs(w.sum() - 1) < 1e-10
    assert np.all(w > 0)
    assert np.all(np.diff(w) > 0)
    assert list(wins) == [l for l in range(p) if labels[l] == labels[-1]]


def test_rmse_examples():
    assert evaluate_rmse([1, 2], [1, 2]) == 0.0
    assert evaluate_rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-15)
    assert evaluate_rmse(np.arange(5.0) + 2.5, np.arange(5.0)) == pytest.approx(2.5, abs=1e-14)
    with pytest.raises(DriftError):
        evaluate_rmse([1, 2], [1])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10 ** 6))
def test_rmse_matches_loop(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=n)
    acc = 0.0
    for x, y in zip(a, b):
        acc += (x - y) ** 2
    assert abs(evaluate_rmse(a, b) - math.sqrt(acc / n)) < 1e-12
