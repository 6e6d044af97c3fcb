import math

import numpy as np
import pytest

from egofuse.kernels import KernelSpec
from egofuse.mkboost import (
    BoostEnsemble,
    BoostError,
    BoostRound,
    MKBoostClassifier,
    boost_margins,
    boost_predict,
    histogram_csv,
    mkboost_train,
    selection_histogram,
)
from egofuse.svm import solve_binary


def rbf_gram(X, gamma=0.5):
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * sq)


def separable_problem(n_per=10, seed=0, gap=4.0):
    rng = np.random.default_rng(seed)
    X = np.vstack(
        [
            rng.standard_normal((n_per, 2)) * 0.5,
            rng.standard_normal((n_per, 2)) * 0.5 + gap,
        ]
    )
    y = np.concatenate([np.ones(n_per), -np.ones(n_per)])
    junk = rng.standard_normal(X.shape)
    return np.stack([rbf_gram(X), rbf_gram(junk)]), y


class TestWeightArithmetic:
    def test_round_weight_formula(self):
        assert 0.5 * math.log((1 - 0.1) / 0.1) == pytest.approx(1.09861, abs=1e-5)
        assert 0.5 * math.log((1 - 0.5) / 0.5) == 0.0

    def test_recorded_rounds_satisfy_weight_identity(self):
        Ks, y = separable_problem()
        ens = mkboost_train(Ks, y, T=8, seed=1)
        for rd in ens.rounds:
            if rd.weight > 0:
                assert rd.weight == pytest.approx(
                    0.5 * math.log((1 - rd.error) / rd.error), rel=1e-12
                )

    def test_zero_error_floored(self):
        # cleanly separable: the first round's weighted error hits the floor
        Ks, y = separable_problem(gap=8.0)
        N = len(y)
        ens = mkboost_train(Ks, y, T=1, seed=0)
        rd = ens.rounds[0]
        assert rd.error == pytest.approx(1.0 / (2.0 * N))
        assert rd.weight == pytest.approx(0.5 * math.log(2.0 * N - 1.0))


class TestTraining:
    def test_distribution_stays_normalized(self):
        Ks, y = separable_problem(seed=3)
        ens = mkboost_train(Ks, y, T=12, seed=3)
        S = ens.final_distribution
        assert S is not None
        assert np.all(S >= 0)
        assert S.sum() == pytest.approx(1.0, abs=1e-12)

    def test_runs_requested_number_of_rounds(self):
        Ks, y = separable_problem()
        ens = mkboost_train(Ks, y, T=5, seed=0)
        assert len(ens.rounds) == 5
        assert ens.n_train == len(y)

    def test_informative_kernel_picked_most(self):
        Ks, y = separable_problem(seed=7)
        ens = mkboost_train(Ks, y, T=10, seed=7)
        picks = np.asarray(ens.kernel_indices)
        assert np.sum(picks == 0) > np.sum(picks == 1)

    def test_error_bound_dominates_training_error(self):
        # independent route: evaluate the realized training error directly
        Ks, y = separable_problem(n_per=12, seed=5, gap=2.0)
        ens = mkboost_train(Ks, y, T=10, seed=5)
        preds = boost_predict(ens, Ks)
        realized = float(np.mean(preds != y))
        assert ens.error_bound() >= realized - 1e-12

    def test_fixed_seed_reproduces_ensemble(self):
        Ks, y = separable_problem(seed=2)
        a = mkboost_train(Ks, y, T=6, seed=42)
        b = mkboost_train(Ks, y, T=6, seed=42)
        assert a.kernel_indices == b.kernel_indices
        for ra, rb in zip(a.rounds, b.rounds):
            assert ra.weight == rb.weight
            np.testing.assert_array_equal(ra.sample_indices, rb.sample_indices)

    def test_different_seeds_draw_different_samples(self):
        Ks, y = separable_problem(seed=2)
        a = mkboost_train(Ks, y, T=3, seed=0)
        b = mkboost_train(Ks, y, T=3, seed=99)
        same = all(
            np.array_equal(ra.sample_indices, rb.sample_indices)
            for ra, rb in zip(a.rounds, b.rounds)
        )
        assert not same

    def test_rejects_bad_arguments(self):
        Ks, y = separable_problem()
        with pytest.raises(BoostError):
            mkboost_train(Ks, y, r=0.0)
        with pytest.raises(BoostError):
            mkboost_train(Ks, y, T=0)
        with pytest.raises(BoostError):
            mkboost_train(Ks, np.ones(len(y)))
        with pytest.raises(BoostError):
            mkboost_train(np.zeros((0, 4, 4)), np.array([1.0, -1.0, 1.0, -1.0]))


class TestPrediction:
    def two_point_solution(self):
        K = np.eye(2)
        y = np.array([1.0, -1.0])
        return solve_binary(K, y, C=10.0)

    def test_single_round_matches_weak_learner(self):
        sol = self.two_point_solution()
        ens = BoostEnsemble(
            rounds=[BoostRound(0, sol, np.array([0, 1]), 1.0, 0.1)], n_train=2
        )
        blocks = np.eye(2)[None, :, :]
        np.testing.assert_array_equal(boost_predict(ens, blocks), [1.0, -1.0])

    def test_tied_margin_goes_positive(self):
        sol = self.two_point_solution()
        rounds = [
            BoostRound(0, sol, np.array([0, 1]), 0.7, 0.2),
            BoostRound(1, sol, np.array([0, 1]), 0.7, 0.2),
        ]
        ens = BoostEnsemble(rounds=rounds, n_train=2)
        base = np.eye(2)
        blocks = np.stack([base, -base])  # round 2 votes opposite to round 1
        margins = boost_margins(ens, blocks)
        np.testing.assert_allclose(margins, 0.0, atol=1e-12)
        np.testing.assert_array_equal(boost_predict(ens, blocks), [1.0, 1.0])

    def test_empty_ensemble_rejected(self):
        with pytest.raises(BoostError, match="empty"):
            boost_predict(BoostEnsemble(n_train=2), np.zeros((1, 2, 2)))

    def test_block_shape_mismatch(self):
        sol = self.two_point_solution()
        ens = BoostEnsemble(
            rounds=[BoostRound(0, sol, np.array([0, 1]), 1.0, 0.1)], n_train=2
        )
        with pytest.raises(BoostError):
            boost_predict(ens, np.zeros((1, 2, 5)))

    def test_training_accuracy_on_separable_data(self):
        Ks, y = separable_problem(seed=9)
        ens = mkboost_train(Ks, y, T=10, seed=9)
        assert np.mean(boost_predict(ens, Ks) == y) == 1.0


class TestSelectionHistogram:
    SPECS = (
        KernelSpec("linear", channels=("GOFF",)),
        KernelSpec("rbf", channels=("VIF",)),
        KernelSpec("dc_int", channels=("GOFF", "VIF")),
    )

    def test_single_model_one_hot(self):
        kinds, channels = selection_histogram([[0, 0, 0]], self.SPECS)
        assert kinds == {"linear": 3}
        assert channels == {"GOFF": 3}

    def test_counts_sum_to_total_picks(self):
        sels = [[0, 1, 2], [2, 2]]
        kinds, _ = selection_histogram(sels, self.SPECS)
        assert sum(kinds.values()) == 5

    def test_disjoint_selections_add(self):
        k1, c1 = selection_histogram([[0]], self.SPECS)
        k2, c2 = selection_histogram([[1]], self.SPECS)
        both_k, both_c = selection_histogram([[0], [1]], self.SPECS)
        for key in set(k1) | set(k2):
            assert both_k[key] == k1.get(key, 0) + k2.get(key, 0)
        for key in set(c1) | set(c2):
            assert both_c[key] == c1.get(key, 0) + c2.get(key, 0)

    def test_channel_counted_once_per_pick(self):
        _, channels = selection_histogram([[2, 2]], self.SPECS)
        assert channels == {"GOFF": 2, "VIF": 2}

    def test_csv_format(self):
        kinds, _ = selection_histogram([[0, 1, 1]], self.SPECS)
        text = histogram_csv(kinds, "kernel_kind,count")
        assert text == "kernel_kind,count\nlinear,1\nrbf,2\n"


class TestClassifier:
    def make_multiclass(self, n_per=8, seed=4):
        rng = np.random.default_rng(seed)
        centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        X = np.vstack([c + 0.4 * rng.standard_normal((n_per, 2)) for c in centers])
        y = np.repeat(np.arange(3), n_per)
        junk = rng.standard_normal(X.shape)
        return np.stack([rbf_gram(X, 0.2), rbf_gram(junk, 0.2)]), y

    def test_fit_predict(self):
        Ks, y = self.make_multiclass()
        clf = MKBoostClassifier(T=8, seed=0).fit(Ks, y)
        assert np.mean(clf.predict(Ks) == y) >= 0.9
        assert clf.decision_function(Ks).shape == (len(y), 3)

    def test_selections_per_class(self):
        Ks, y = self.make_multiclass()
        clf = MKBoostClassifier(T=8, seed=0).fit(Ks, y)
        sels = clf.kernel_selections()
        assert len(sels) == 3
        assert all(len(s) == 8 for s in sels)

    def test_deterministic_across_fits(self):
        Ks, y = self.make_multiclass()
        a = MKBoostClassifier(T=5, seed=7).fit(Ks, y)
        b = MKBoostClassifier(T=5, seed=7).fit(Ks, y)
        assert a.kernel_selections() == b.kernel_selections()

    def test_not_fitted(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            MKBoostClassifier().predict(np.zeros((1, 2, 2)))
