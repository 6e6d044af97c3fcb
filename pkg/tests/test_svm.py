import itertools

import numpy as np
import pytest

from egofuse.kernels import KernelSpec, cross_gram, gram
from egofuse.svm import (
    KernelSVC,
    SvmError,
    decision_value,
    decision_values,
    solve_binary,
)


def linear_gram(X):
    return X @ X.T


class TestSolveBinary:
    def test_two_point_analytic(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        sol = solve_binary(linear_gram(X), y, C=10.0)
        assert np.allclose(sol.alpha, [0.5, 0.5], atol=1e-6)
        assert sol.bias == pytest.approx(0.0, abs=1e-6)
        assert set(sol.support_) == {0, 1}
        assert sol.objective == pytest.approx(0.5, abs=1e-6)

    def test_conflicting_duplicate_hits_box(self):
        X = np.array([[2.0], [2.0]])
        y = np.array([1.0, -1.0])
        sol = solve_binary(linear_gram(X), y, C=1.0)
        assert np.allclose(sol.alpha, [1.0, 1.0], atol=1e-8)

    def test_conflicting_duplicate_brute_force_oracle(self):
        # maximize sum(a) - 0.5 a'Qa over the 0.01 grid of the feasible square
        X = np.array([[2.0], [2.0]])
        y = np.array([1.0, -1.0])
        K = linear_gram(X)
        Q = np.outer(y, y) * K
        best, best_a = -np.inf, None
        for a1 in np.linspace(0, 1, 101):
            a2 = a1  # equality constraint forces a1 = a2 here
            a = np.array([a1, a2])
            w = a.sum() - 0.5 * a @ Q @ a
            if w > best:
                best, best_a = w, a
        sol = solve_binary(K, y, C=1.0)
        got = sol.alpha.sum() - 0.5 * sol.alpha @ Q @ sol.alpha
        assert got >= best - 1e-8
        assert np.allclose(sol.alpha, best_a, atol=1e-6)

    def test_constraints_hold(self, rng):
        X = rng.standard_normal((30, 4))
        y = np.where(rng.uniform(size=30) > 0.5, 1.0, -1.0)
        if len(np.unique(y)) < 2:
            y[0] = -y[0]
        sol = solve_binary(linear_gram(X), y, C=1.0)
        assert np.all(sol.alpha >= -1e-12) and np.all(sol.alpha <= 1.0 + 1e-12)
        assert abs(sol.alpha @ y) <= 1e-8

    def test_kkt_on_free_support_vectors(self, rng):
        X = np.vstack([rng.normal(-2, 0.7, (15, 2)), rng.normal(2, 0.7, (15, 2))])
        y = np.concatenate([-np.ones(15), np.ones(15)])
        K = linear_gram(X)
        tol = 1e-4
        sol = solve_binary(K, y, C=1.0, tol=tol)
        eps = 1e-8
        free = (sol.alpha > eps) & (sol.alpha < 1.0 - eps)
        for i in np.flatnonzero(free):
            f = decision_value(sol, K[i])
            assert abs(f - y[i]) <= 10 * tol

    def test_separable_large_c_trains_clean(self, rng):
        X = np.vstack([rng.normal(-3, 0.5, (20, 3)), rng.normal(3, 0.5, (20, 3))])
        y = np.concatenate([-np.ones(20), np.ones(20)])
        K = linear_gram(X)
        sol = solve_binary(K, y, C=100.0)
        pred = np.sign(decision_values(sol, K))
        assert np.all(pred == y)

    def test_permutation_invariance(self, rng):
        X = np.vstack([rng.normal(-1.5, 1, (12, 2)), rng.normal(1.5, 1, (12, 2))])
        y = np.concatenate([-np.ones(12), np.ones(12)])
        K = linear_gram(X)
        tol = 1e-5
        sol = solve_binary(K, y, C=1.0, tol=tol)
        perm = rng.permutation(24)
        sol_p = solve_binary(K[np.ix_(perm, perm)], y[perm], C=1.0, tol=tol)
        back = np.empty_like(sol_p.alpha)
        back[perm] = sol_p.alpha
        assert np.allclose(back, sol.alpha, atol=10 * tol)

    def test_objective_nondecreasing_over_iterations(self, rng):
        X = rng.standard_normal((20, 3))
        y = np.where(X[:, 0] + 0.3 * rng.standard_normal(20) > 0, 1.0, -1.0)
        if len(np.unique(y)) < 2:
            y[0] = -y[0]
        K = linear_gram(X)
        prev = -np.inf
        for cap in range(1, 40, 3):
            sol = solve_binary(K, y, C=1.0, tol=1e-12, max_iter=cap)
            assert sol.objective >= prev - 1e-9
            prev = sol.objective

    def test_warm_start_reaches_same_solution(self, rng):
        X = rng.standard_normal((16, 3))
        y = np.where(X[:, 0] > 0, 1.0, -1.0)
        if len(np.unique(y)) < 2:
            y[0] = -y[0]
        K = linear_gram(X)
        cold = solve_binary(K, y, C=1.0, tol=1e-6)
        warm = solve_binary(K, y, C=1.0, tol=1e-6, alpha0=cold.alpha)
        assert warm.n_iter <= 1
        assert np.allclose(warm.alpha, cold.alpha, atol=1e-6)

    def test_single_class_rejected(self):
        with pytest.raises(SvmError, match="both label"):
            solve_binary(np.eye(3), np.ones(3), C=1.0)

    def test_bad_labels_rejected(self):
        with pytest.raises(SvmError, match="-1"):
            solve_binary(np.eye(2), np.array([0.0, 1.0]), C=1.0)


class TestDecision:
    def test_midpoint_is_zero(self):
        X = np.array([[2.0], [-2.0]])
        y = np.array([1.0, -1.0])
        sol = solve_binary(linear_gram(X), y, C=10.0)
        k_mid = np.array([0.0, 0.0])  # linear kernel rows of the origin
        assert decision_value(sol, k_mid) == pytest.approx(0.0, abs=1e-8)

    def test_length_mismatch(self):
        X = np.array([[1.0], [-1.0]])
        sol = solve_binary(linear_gram(X), np.array([1.0, -1.0]), C=1.0)
        with pytest.raises(SvmError, match="length|columns"):
            decision_value(sol, np.zeros(3))


class TestKernelSVC:
    def test_three_blobs_match_nearest_centroid(self, rng):
        centers = np.array([[0.0, 6.0], [-6.0, -3.0], [6.0, -3.0]])
        Xtr = np.vstack([rng.normal(c, 0.5, (15, 2)) for c in centers])
        ytr = np.repeat([0, 1, 2], 15)
        Xte = np.vstack([rng.normal(c, 0.5, (8, 2)) for c in centers])
        spec = KernelSpec("rbf", gamma=0.5)
        K = gram(spec, Xtr).matrix
        clf = KernelSVC(C=10.0).fit(K, ytr)
        pred = clf.predict(cross_gram(spec, Xte, Xtr))
        centroid_pred = np.argmin(
            ((Xte[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        assert np.array_equal(pred, centroid_pred)

    def test_decision_function_shape(self, rng):
        X = rng.standard_normal((20, 3))
        y = rng.integers(0, 3, size=20)
        y[:3] = [0, 1, 2]
        K = linear_gram(X)
        clf = KernelSVC(C=1.0).fit(K, y)
        scores = clf.decision_function(K[:5])
        assert scores.shape == (5, 3)

    def test_get_params(self):
        assert KernelSVC(C=3.0).get_params()["C"] == 3.0

    def test_unfitted(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            KernelSVC().predict(np.zeros((2, 2)))
