import numpy as np
import pytest

from egofuse.encoding import (
    CodebookEncoder,
    EncodingError,
    PcaReducer,
    StdScaler,
    bow_encode,
    kmeans_fit,
    pca_fit,
    pca_project,
    standardize_apply,
    standardize_fit,
)


def distortion(X, centers):
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.min(axis=1).sum()


class TestKmeans:
    def test_n_equals_k_zero_distortion(self, rng):
        X = rng.standard_normal((6, 3)) * 10
        cb = kmeans_fit(X, 6, seed=0)
        assert distortion(X, cb.centers) < 1e-18
        assert cb.k == 6

    def test_two_blobs_recovers_means(self, rng):
        n = 200
        a = rng.normal(loc=(-10, 0), scale=1.0, size=(n, 2))
        b = rng.normal(loc=(10, 5), scale=1.0, size=(n, 2))
        X = np.vstack([a, b])
        cb = kmeans_fit(X, 2, seed=1)
        got = cb.centers[np.argsort(cb.centers[:, 0])]
        want = np.vstack([a.mean(axis=0), b.mean(axis=0)])
        tol = 3.0 / np.sqrt(n)
        assert np.all(np.abs(got - want) < tol)

    def test_same_seed_identical(self, rng):
        X = rng.standard_normal((50, 4))
        c1 = kmeans_fit(X, 5, seed=7).centers
        c2 = kmeans_fit(X, 5, seed=7).centers
        assert np.array_equal(c1, c2)

    def test_distortion_nonincreasing_over_iterations(self, rng):
        X = rng.standard_normal((120, 3))
        prev = np.inf
        for t in range(1, 9):
            cb = kmeans_fit(X, 8, seed=3, max_iter=t)
            d = distortion(X, cb.centers)
            assert d <= prev + 1e-9
            prev = d

    def test_too_few_points(self, rng):
        with pytest.raises(EncodingError, match="at least"):
            kmeans_fit(rng.standard_normal((3, 2)), 5, seed=0)

    def test_no_duplicate_centers_on_distinct_points(self, rng):
        X = rng.standard_normal((40, 2)) * 5
        cb = kmeans_fit(X, 4, seed=2)
        d = ((cb.centers[:, None] - cb.centers[None, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() > 1e-12


class TestBow:
    def test_single_vector_one_hot(self, rng):
        cb = kmeans_fit(rng.standard_normal((10, 3)), 4, seed=0)
        h = bow_encode(cb.centers[2:3] + 1e-6, cb)
        assert h[2] == 1.0 and h.sum() == 1.0

    def test_sums_to_one(self, rng):
        cb = kmeans_fit(rng.standard_normal((60, 5)), 8, seed=0)
        h = bow_encode(rng.standard_normal((33, 5)), cb)
        assert h.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(h >= 0)

    def test_all_near_one_center(self, rng):
        centers = np.eye(5) * 100
        from egofuse.encoding import Codebook

        cb = Codebook(centers=centers, seed=0)
        X = np.tile(centers[3], (10, 1)) + rng.normal(scale=0.01, size=(10, 5))
        h = bow_encode(X, cb)
        assert h[3] == 1.0

    def test_permutation_invariant(self, rng):
        cb = kmeans_fit(rng.standard_normal((40, 4)), 6, seed=1)
        X = rng.standard_normal((25, 4))
        h1 = bow_encode(X, cb)
        h2 = bow_encode(X[::-1], cb)
        assert np.array_equal(h1, h2)

    def test_tie_goes_to_lowest_index(self):
        from egofuse.encoding import Codebook

        cb = Codebook(centers=np.array([[1.0, 0.0], [-1.0, 0.0]]), seed=0)
        h = bow_encode(np.array([[0.0, 5.0]]), cb)  # equidistant
        assert h[0] == 1.0

    def test_empty_input_uniform(self, rng):
        cb = kmeans_fit(rng.standard_normal((10, 3)), 4, seed=0)
        h = bow_encode(np.empty((0, 3)), cb)
        assert np.allclose(h, 0.25)

    def test_dim_mismatch(self, rng):
        cb = kmeans_fit(rng.standard_normal((10, 3)), 4, seed=0)
        with pytest.raises(EncodingError, match="mismatch"):
            bow_encode(rng.standard_normal((5, 4)), cb)


class TestPca:
    def test_collinear_first_component(self):
        t = np.linspace(-3, 3, 50)
        X = np.column_stack([t, 2 * t + 1e-6 * np.sin(t)])
        m = pca_fit(X, 2)
        frac = m.explained_variance[0] / m.explained_variance.sum()
        assert frac >= 0.9999

    def test_project_mean_is_zero(self, rng):
        X = rng.standard_normal((20, 5))
        m = pca_fit(X, 3)
        assert np.allclose(pca_project(m, X.mean(axis=0)), 0.0, atol=1e-12)

    def test_full_rank_reconstruction(self, rng):
        X = rng.standard_normal((20, 5))
        m = pca_fit(X, 5)
        proj = pca_project(m, X)
        back = proj @ m.basis.T + m.mean
        assert np.max(np.abs(back - X)) < 1e-9

    def test_matches_eigendecomposition_oracle(self, rng):
        X = rng.standard_normal((40, 6)) @ rng.standard_normal((6, 6))
        m = pca_fit(X, 4)
        cov = np.cov(X, rowvar=False)
        vals, vecs = np.linalg.eigh(cov)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        assert np.allclose(m.explained_variance, vals[:4], rtol=1e-8)
        for j in range(4):
            # eigenvectors match up to sign
            dot = abs(float(m.basis[:, j] @ vecs[:, j]))
            assert dot == pytest.approx(1.0, abs=1e-8)

    def test_orthonormal_and_variance_total(self, rng):
        X = rng.standard_normal((30, 8))
        m = pca_fit(X, 8)
        assert np.allclose(m.basis.T @ m.basis, np.eye(8), atol=1e-10)
        total = np.trace(np.cov(X, rowvar=False))
        assert m.explained_variance.sum() == pytest.approx(total, rel=1e-8)
        assert np.all(np.diff(m.explained_variance) <= 1e-12)

    def test_variance_fraction_selection(self, rng):
        X = rng.standard_normal((100, 4)) * np.array([10.0, 3.0, 0.5, 0.1])
        m = pca_fit(X, 0.9)
        cum = np.cumsum(m.explained_variance)
        assert m.r < 4

    def test_retained_too_large(self, rng):
        with pytest.raises(EncodingError, match="retained"):
            pca_fit(rng.standard_normal((5, 10)), 5)  # rank cap is n-1 = 4

    def test_dual_path_tall_dims(self, rng):
        # more dimensions than samples: rank-limited basis still orthonormal
        X = rng.standard_normal((10, 200))
        m = pca_fit(X, 9)
        assert m.basis.shape == (200, 9)
        assert np.allclose(m.basis.T @ m.basis, np.eye(9), atol=1e-10)


class TestStandardize:
    def test_constant_column_unchanged(self, rng):
        X = rng.standard_normal((20, 3))
        X[:, 1] = 4.2
        s = standardize_fit(X)
        out = standardize_apply(X, s)
        assert np.array_equal(out[:, 1], X[:, 1])

    def test_sigma_two_halved(self):
        X = np.array([[0.0], [4.0]])  # std = 2
        s = standardize_fit(X)
        assert np.array_equal(standardize_apply(X, s), X / 2.0)

    def test_unit_variance_after_apply(self, rng):
        X = rng.standard_normal((50, 6)) * np.array([1, 2, 3, 4, 5, 6.0])
        out = standardize_apply(X, standardize_fit(X))
        assert np.allclose(out.std(axis=0), 1.0, atol=1e-9)

    def test_test_vectors_use_train_scales(self, rng):
        train = rng.standard_normal((30, 2)) * 5
        test = rng.standard_normal((10, 2))
        s = standardize_fit(train)
        assert np.allclose(standardize_apply(test, s), test / train.std(axis=0))


class TestEstimators:
    def test_codebook_encoder(self, rng):
        enc = CodebookEncoder(k=5, seed=0)
        enc.fit(rng.standard_normal((40, 3)))
        h = enc.transform(rng.standard_normal((12, 3)))
        assert h.shape == (5,) and h.sum() == pytest.approx(1.0)
        assert enc.get_params()["k"] == 5

    def test_codebook_k_clamped_to_data(self, rng):
        enc = CodebookEncoder(k=300, seed=0).fit(rng.standard_normal((20, 3)))
        assert enc.codebook_.k == 20

    def test_pca_reducer_clamps(self, rng):
        red = PcaReducer(retained=128).fit(rng.standard_normal((10, 6)))
        assert red.model_.r == 6
        out = red.transform(rng.standard_normal((4, 6)))
        assert out.shape == (4, 6)

    def test_std_scaler(self, rng):
        X = rng.standard_normal((30, 4)) * 3
        sc = StdScaler().fit(X)
        assert np.allclose(sc.transform(X).std(axis=0), 1.0, atol=1e-9)

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            StdScaler().transform(np.zeros((2, 2)))
