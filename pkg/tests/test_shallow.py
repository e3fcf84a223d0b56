import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psyspeech import shallow
from psyspeech.shallow import (CLASSIFIERS, DatasetMatrix, DecisionTree, GaussianNB, KNearestNeighbors, LDA,
                               QDA, RandomForest, make_classifier)


def blobs(seed, n=200, d=2, sigma=0.1, dist=5.0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    centers = np.zeros((2, d))
    centers[1, 0] = dist
    return centers[y] + rng.normal(0, sigma, (n, d)), y


def noisy_problem(seed, n=120, d=4):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, d)) + 0.8 * y[:, None] * rng.normal(size=d)
    return X, y


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError):
            DatasetMatrix(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(ValueError):
            DatasetMatrix(np.array([[np.nan]]), np.zeros(1))
        with pytest.raises(ValueError):
            DatasetMatrix(np.zeros((2, 1)), np.array([0, 2]))
        with pytest.raises(ValueError):
            DatasetMatrix(np.zeros((2, 1)), np.zeros(2), group_ids=("a",))


class TestAllClassifiers:
    @pytest.mark.parametrize("name", sorted(CLASSIFIERS))
    def test_separated_blobs(self, name):
        X, y = blobs(0)
        Xt, yt = blobs(1)
        pred, scores = shallow.fit_predict(name, DatasetMatrix(X, y), Xt)
        assert np.mean(pred == yt) >= 0.99
        assert scores.shape == (len(yt),)

    @pytest.mark.parametrize("name", sorted(CLASSIFIERS))
    def test_deterministic(self, name):
        X, y = noisy_problem(3)
        a = make_classifier(name, seed=4).fit(X, y).scores(X)
        b = make_classifier(name, seed=4).fit(X, y).scores(X)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("name", sorted(CLASSIFIERS))
    def test_unfitted_and_width_errors(self, name):
        model = make_classifier(name)
        with pytest.raises(shallow.NotFittedError):
            model.scores(np.zeros((1, 2)))
        X, y = blobs(0, n=20)
        model.fit(X, y)
        with pytest.raises(ValueError):
            model.scores(np.zeros((1, 3)))

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            make_classifier("GBM")


class TestLDA:
    def test_symmetric_data_boundary_at_midpoint(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(100, 3)) @ np.array([[1.0, 0.3, 0.0], [0.0, 1.0, 0.5], [0.0, 0.0, 0.7]])
        shift = np.array([2.0, -1.0, 0.5])
        X = np.vstack([A + shift, -A - shift])
        y = np.repeat([1, 0], 100)
        model = LDA().fit(X, y)
        assert abs(model.scores(np.zeros((1, 3)))[0]) < 1e-6
        # normal direction equals the pooled-covariance solve
        Ac = A - A.mean(0)
        S = 2 * Ac.T @ Ac / 198
        mu = X[y == 1].mean(0) - X[y == 0].mean(0)
        w = np.linalg.solve(S, mu)
        np.testing.assert_allclose(model.w_ / np.linalg.norm(model.w_), w / np.linalg.norm(w), atol=1e-6)

    @settings(max_examples=25)
    @given(st.integers(0, 10_000))
    def test_affine_invariance(self, seed):
        X, y = noisy_problem(seed, d=3)
        rng = np.random.default_rng(seed + 1)
        M = rng.normal(size=(3, 3)) + 2 * np.eye(3)
        t = rng.normal(size=3)
        Xt = rng.normal(size=(50, 3))
        a = LDA().fit(X, y).predict(Xt)
        b = LDA().fit(X @ M + t, y).predict(Xt @ M + t)
        np.testing.assert_array_equal(a, b)

    def test_singular_is_reported(self):
        X = np.zeros((6, 2))
        y = np.array([0, 0, 0, 1, 1, 1])
        with pytest.raises(shallow.SingularCovarianceError):
            LDA().fit(X, y)

    def test_single_class(self):
        with pytest.raises(ValueError):
            LDA().fit(np.random.default_rng(0).normal(size=(4, 2)), np.zeros(4))

    def test_scores_match_direct_formula(self):
        X, y = noisy_problem(5)
        Xt = np.random.default_rng(6).normal(size=(30, 4))
        mu0, mu1 = X[y == 0].mean(0), X[y == 1].mean(0)
        S = ((X[y == 0] - mu0).T @ (X[y == 0] - mu0) + (X[y == 1] - mu1).T @ (X[y == 1] - mu1)) / (len(y) - 2)
        D = np.diag(X.std(0))
        Dinv = np.linalg.inv(D)
        S = S + 1e-6 * np.trace(Dinv @ S @ Dinv) / 4 * D @ D
        Si = np.linalg.inv(S)
        p1 = y.mean()
        ref = [(x - (mu0 + mu1) / 2) @ Si @ (mu1 - mu0) + math.log(p1 / (1 - p1)) for x in Xt]
        np.testing.assert_allclose(LDA().fit(X, y).scores(Xt), ref, rtol=1e-9, atol=1e-9)


class TestQDA:
    @settings(max_examples=25)
    @given(st.integers(0, 10_000))
    def test_per_feature_scaling_invariance(self, seed):
        X, y = noisy_problem(seed, d=3)
        s = np.random.default_rng(seed).uniform(0.01, 100, 3)
        Xt = np.random.default_rng(seed + 1).normal(size=(50, 3))
        a = QDA().fit(X, y).predict(Xt)
        b = QDA().fit(X * s, y).predict(Xt * s)
        np.testing.assert_array_equal(a, b)

    def test_needs_two_per_class(self):
        with pytest.raises(shallow.SingularCovarianceError):
            QDA().fit(np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 1]))

    def test_matches_gaussian_loglik(self):
        X, y = noisy_problem(8, d=2)
        Xt = np.random.default_rng(9).normal(size=(10, 2))

        D = np.diag(X.std(0))
        Dinv = np.linalg.inv(D)

        def loglik(x, Xc, prior):
            mu = Xc.mean(0)
            C = np.cov(Xc.T)
            C = C + 1e-6 * np.trace(Dinv @ C @ Dinv) / 2 * D @ D
            r = x - mu
            return -0.5 * r @ np.linalg.inv(C) @ r - 0.5 * math.log(np.linalg.det(C)) + math.log(prior)

        ref = [loglik(x, X[y == 1], y.mean()) - loglik(x, X[y == 0], 1 - y.mean()) for x in Xt]
        np.testing.assert_allclose(QDA().fit(X, y).scores(Xt), ref, rtol=1e-9, atol=1e-9)


class TestNB:
    def test_symmetric_point_scores_half(self):
        X = np.array([[-1.0, 2.0], [-3.0, 0.0], [1.0, 2.0], [3.0, 0.0]])
        y = np.array([0, 0, 1, 1])
        assert NB_score(X, y, [[0.0, 1.0]]) == pytest.approx(0.5, abs=1e-15)

    @settings(max_examples=25)
    @given(st.integers(0, 10_000))
    def test_per_feature_scaling_invariance(self, seed):
        X, y = noisy_problem(seed, d=3)
        s = np.random.default_rng(seed).uniform(0.01, 100, 3)
        Xt = np.random.default_rng(seed + 1).normal(size=(50, 3))
        np.testing.assert_array_equal(GaussianNB().fit(X, y).predict(Xt), GaussianNB().fit(X * s, y).predict(Xt * s))

    def test_matches_direct_posterior(self):
        X, y = noisy_problem(10, d=3)
        Xt = np.random.default_rng(11).normal(size=(10, 3))
        eps = 1e-9 * X.var(0)
        ref = []
        for x in Xt:
            lik = []
            for c in (0, 1):
                Xc = X[y == c]
                v = Xc.var(0) + eps
                dens = np.prod(np.exp(-(x - Xc.mean(0)) ** 2 / (2 * v)) / np.sqrt(2 * np.pi * v))
                lik.append(dens * np.mean(y == c))
            ref.append(lik[1] / (lik[0] + lik[1]))
        np.testing.assert_allclose(GaussianNB().fit(X, y).scores(Xt), ref, rtol=1e-9)

    def test_scores_in_unit_interval(self):
        X, y = blobs(0)
        s = GaussianNB().fit(X, y).scores(np.array([[100.0, 0.0], [-100.0, 0.0]]))
        assert np.all((s >= 0) & (s <= 1)) and s[0] == 1.0 and s[1] == 0.0


def NB_score(X, y, Xt):
    return GaussianNB().fit(X, y).scores(np.asarray(Xt))[0]


class TestKNN:
    def test_k1_on_training_set(self):
        X, y = noisy_problem(12)
        assert np.all(KNearestNeighbors(k=1).fit(X, y).predict(X) == y)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            KNearestNeighbors(k=10).fit(np.zeros((5, 1)), np.array([0, 1, 0, 1, 0]))

    def test_matches_brute_force(self):
        X, y = noisy_problem(13, n=40)
        Xt = np.random.default_rng(14).normal(size=(15, 4))
        ref = []
        for x in Xt:
            d = [sum((a - b) ** 2 for a, b in zip(x, r)) for r in X]
            order = sorted(range(len(X)), key=lambda i: (d[i], i))[:5]
            ref.append(sum(y[i] for i in order) / 5)
        np.testing.assert_allclose(KNearestNeighbors(k=5).fit(X, y).scores(Xt), ref)


class TestTreesAndForest:
    def test_tree_fits_training_set(self):
        X, y = noisy_problem(15)
        assert np.all(DecisionTree().fit(X, y).predict(X) == y)

    def test_max_depth(self):
        X, y = noisy_problem(15)
        stump = DecisionTree(max_depth=1).fit(X, y)
        assert np.unique(stump.leaf_values(X)).size <= 2

    def test_scores_are_vote_fractions(self):
        X, y = noisy_problem(16)
        rf = RandomForest(n_trees=7, seed=1).fit(X, y)
        votes = np.array([t.predict(X) for t in rf.trees_])
        np.testing.assert_array_equal(rf.scores(X), votes.mean(0))
        assert set(np.unique(rf.scores(X) * 7)).issubset(set(range(8)))

    def test_bagging_beats_its_trees_on_average(self):
        rf_acc, tree_acc = [], []
        for seed in range(20):
            X, y = noisy_problem(100 + seed, n=100, d=6)
            rf = RandomForest(n_trees=25, seed=seed).fit(X, y)
            rf_acc.append(np.mean(rf.predict(X) == y))
            tree_acc.append(np.mean([np.mean(t.predict(X) == y) for t in rf.trees_]))
        assert np.mean(rf_acc) >= np.mean(tree_acc)

    def test_seed_changes_forest(self):
        X, y = noisy_problem(17)
        a = RandomForest(n_trees=10, seed=0).fit(X, y).scores(X)
        b = RandomForest(n_trees=10, seed=1).fit(X, y).scores(X)
        assert not np.array_equal(a, b)


class TestSVM:
    def test_score_is_signed_margin(self):
        X, y = blobs(0)
        m = make_classifier("SVM").fit(X, y)
        s = m.scores(X)
        np.testing.assert_array_equal(m.predict(X), (s > 0).astype(int))
        assert np.linalg.norm(m.w_) <= 1 / np.sqrt(m.lam) + 1e-12

    def test_predict_proba_is_scores(self):
        X, y = blobs(0)
        m = make_classifier("SVM").fit(X, y)
        np.testing.assert_array_equal(shallow.predict_proba(m, X), m.scores(X))
