"""Shallow binary classifiers over document vectors.

Every model follows ``fit(X, y) -> self``, ``scores(X)`` (a real score,
larger means "more positive"; only its rank order is meaningful) and
``predict(X)``.  Labels are 0/1.
"""

from dataclasses import dataclass

import numpy as np


class NotFittedError(RuntimeError):
    pass


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DatasetMatrix:
    X: np.ndarray
    y: np.ndarray
    group_ids: tuple = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y).astype(np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"X {X.shape} and y {y.shape} disagree")
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0/1")
        if self.group_ids is not None and len(self.group_ids) != X.shape[0]:
            raise ValueError("group_ids length differs from X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)


def _check_xy(X, y):
    d = DatasetMatrix(X, y)
    if d.X.shape[0] == 0:
        raise ValueError("empty training set")
    return d.X, d.y


class Classifier:
    name = "base"

    def fit(self, X, y):
        raise NotImplementedError

    def _scores(self, X):
        raise NotImplementedError

    def _require_fit(self):
        if not getattr(self, "fitted_", False):
            raise NotFittedError(f"{self.name} model is not fitted")

    def scores(self, X):
        self._require_fit()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} features, got shape {X.shape}")
        return self._scores(X)

    threshold = 0.0

    def predict(self, X):
        return (self.scores(X) > self.threshold).astype(np.int64)


def _single_class(y):
    return np.unique(y).size < 2


# ------------------------------------------------------------ random forest


class DecisionTree:
    """Binary CART with Gini impurity; leaves hold the positive fraction."""

    def __init__(self, max_features=None, max_depth=None, min_samples_split=2, rng=None):
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def _best_split(self, X, y, feats):
        n = y.size
        Xs = X[:, feats]
        order = np.argsort(Xs, axis=0, kind="stable")
        xs = np.take_along_axis(Xs, order, axis=0)
        ys = y[order]
        pos_left = np.cumsum(ys, axis=0)[:-1]
        n_left = np.arange(1, n, dtype=np.float64)[:, None]
        n_right = n - n_left
        pos_right = ys.sum(axis=0) - pos_left
        # weighted Gini (times n): n_l * (1 - p_l^2 - q_l^2) = 2 * pos_l * neg_l / n_l
        cost = 2 * pos_left * (n_left - pos_left) / n_left + 2 * pos_right * (n_right - pos_right) / n_right
        cost = np.where(xs[1:] > xs[:-1], cost, np.inf)
        flat = int(np.argmin(cost))
        i, j = divmod(flat, len(feats))
        if not np.isfinite(cost[i, j]):
            return None
        return feats[j], 0.5 * (xs[i, j] + xs[i + 1, j]), cost[i, j]

    def fit(self, X, y):
        n, d = X.shape
        m = d if self.max_features is None else max(1, min(d, int(self.max_features)))
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            return len(value) - 1

        stack = [(new_node(np.arange(n)), np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            yi = y[idx]
            pos = yi.sum()
            if pos == 0 or pos == yi.size or yi.size < self.min_samples_split:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            Xi = X[idx]
            feats = self.rng.permutation(d)
            split = self._best_split(Xi, yi, feats[:m])
            if split is None and m < d:
                split = self._best_split(Xi, yi, feats[m:])
            if split is None:
                continue
            f, t, _ = split
            go_left = Xi[:, f] <= t
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = int(f), float(t)
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        return self

    def leaf_values(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature_[node] >= 0
        while active.any():
            f = self.feature_[node[active]]
            go_left = X[active, f] <= self.threshold_[node[active]]
            node[active] = np.where(go_left, self.left_[node[active]], self.right_[node[active]])
            active = self.feature_[node] >= 0
        return self.value_[node]

    def predict(self, X):
        return (self.leaf_values(X) > 0.5).astype(np.int64)


class RandomForest(Classifier):
    """Bagged CART trees with sqrt(d) candidate features per split.

    The score is the fraction of trees voting positive; a tree votes with
    its leaf's majority class (ties go negative).
    """

    name = "RF"
    threshold = 0.5

    def __init__(self, n_trees=100, max_features="sqrt", max_depth=None, seed=0):
        self.n_trees = int(n_trees)
        self.max_features = max_features
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        m = max(1, int(np.sqrt(d))) if self.max_features == "sqrt" else self.max_features
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.n_trees):
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(max_features=m, max_depth=self.max_depth, rng=rng)
            self.trees_.append(tree.fit(X[boot], y[boot]))
        self.n_features_ = d
        self.fitted_ = True
        return self

    def _scores(self, X):
        return np.mean([t.predict(X) for t in self.trees_], axis=0)


# ------------------------------------------------------------ linear SVM


class LinearSVM(Classifier):
    """Linear soft-margin SVM trained with mini-batch Pegasos.

    Features are standardised internally; a constant column carries the
    bias.  The score is the signed margin ``w . x + b``.
    """

    name = "SVM"

    def __init__(self, lam=1e-3, n_iter=2000, batch_size=32, seed=0):
        self.lam = float(lam)
        self.n_iter = int(n_iter)
        self.batch_size = int(batch_size)
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, d = X.shape
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = np.hstack([(X - self.mean_) / self.scale_, np.ones((n, 1))])
        s = 2.0 * y - 1.0
        rng = np.random.default_rng(self.seed)
        w = np.zeros(d + 1)
        radius = 1.0 / np.sqrt(self.lam)
        k = min(self.batch_size, n)
        for t in range(1, self.n_iter + 1):
            batch = rng.integers(0, n, size=k)
            viol = s[batch] * (Z[batch] @ w) < 1.0
            eta = 1.0 / (self.lam * t)
            w *= 1.0 - eta * self.lam
            if viol.any():
                w += (eta / k) * (s[batch][viol] @ Z[batch][viol])
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
        self.w_ = w
        self.n_features_ = d
        self.fitted_ = True
        return self

    def _scores(self, X):
        return ((X - self.mean_) / self.scale_) @ self.w_[:-1] + self.w_[-1]


# ------------------------------------------------------------ k nearest neighbours


class KNearestNeighbors(Classifier):
    """Euclidean k-NN; the score is the positive fraction among the k
    nearest training points (distance ties broken by training order)."""

    name = "KNN"
    threshold = 0.5

    def __init__(self, k=5):
        self.k = int(k)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        if self.k < 1 or self.k > X.shape[0]:
            raise ValueError(f"k={self.k} is not in [1, n={X.shape[0]}]")
        self.X_, self.y_ = X, y
        self.n_features_ = X.shape[1]
        self.fitted_ = True
        return self

    def _scores(self, X):
        d2 = (X * X).sum(1)[:, None] - 2 * X @ self.X_.T + (self.X_ * self.X_).sum(1)[None, :]
        nn = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return self.y_[nn].mean(axis=1)


# ------------------------------------------------------------ Gaussian models


def _ridge(cov):
    d = cov.shape[0]
    return cov + (1e-6 * np.trace(cov) / d) * np.eye(d)


def _chol(cov, what):
    try:
        c = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        c = None
    if c is None or np.min(np.diag(c)) <= 1e-12 * max(1.0, np.max(np.diag(c))):
        raise SingularCovarianceError(f"{what} covariance is singular after ridge")
    return c


def _class_stats(X, y):
    if _single_class(y):
        raise ValueError("training data has a single class")
    stats = []
    for c in (0, 1):
        Xc = X[y == c]
        stats.append((Xc, Xc.mean(axis=0), Xc.shape[0] / X.shape[0]))
    return stats


def _standardizer(X):
    """Per-feature mean and scale; the ridge is applied in these units so
    that it does not depend on the features' measurement scales."""
    sd = X.std(axis=0)
    return X.mean(axis=0), np.where(sd > 0, sd, 1.0)


class LDA(Classifier):
    """Shared-covariance Gaussian classifier; the score is the log-odds.

    ``w_`` and ``b_`` are expressed in the caller's feature units.
    """

    name = "LDA"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        mean, scale = _standardizer(X)
        Z = (X - mean) / scale
        stats = _class_stats(Z, y)
        n = Z.shape[0]
        S = sum((Zc - mu).T @ (Zc - mu) for Zc, mu, _ in stats) / max(n - 2, 1)
        C = _chol(_ridge(np.atleast_2d(S)), "pooled")
        (_, mu0, p0), (_, mu1, p1) = stats
        w = np.linalg.solve(C.T, np.linalg.solve(C, mu1 - mu0))
        b = -0.5 * (mu1 + mu0) @ w + np.log(p1 / p0)
        self.w_ = w / scale
        self.b_ = b - mean @ self.w_
        self.n_features_ = X.shape[1]
        self.fitted_ = True
        return self

    def _scores(self, X):
        return X @ self.w_ + self.b_


class QDA(Classifier):
    """Per-class-covariance Gaussian classifier; the score is the log-odds."""

    name = "QDA"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.mean_, self.scale_ = _standardizer(X)
        Z = (X - self.mean_) / self.scale_
        self.classes_ = []
        for c, (Zc, mu, prior) in enumerate(_class_stats(Z, y)):
            if Zc.shape[0] < 2:
                raise SingularCovarianceError(f"class {c} has fewer than two samples")
            S = np.atleast_2d(np.cov(Zc, rowvar=False))
            C = _chol(_ridge(S), f"class {c}")
            logdet = 2.0 * np.log(np.diag(C)).sum()
            self.classes_.append((mu, C, logdet, np.log(prior)))
        self.n_features_ = X.shape[1]
        self.fitted_ = True
        return self

    def _loglik(self, Z, mu, C, logdet, logprior):
        z = np.linalg.solve(C, (Z - mu).T)
        return -0.5 * (z * z).sum(axis=0) - 0.5 * logdet + logprior

    def _scores(self, X):
        Z = (X - self.mean_) / self.scale_
        return self._loglik(Z, *self.classes_[1]) - self._loglik(Z, *self.classes_[0])


class GaussianNB(Classifier):
    """Per-feature Gaussian naive Bayes; the score is P(y=1 | x).

    Each class variance gets ``1e-9`` times that feature's overall variance
    added, which keeps the model invariant to per-feature scaling.
    """

    name = "NB"
    threshold = 0.5

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        stats = _class_stats(X, y)
        overall = X.var(axis=0)
        eps = np.where(overall > 0, 1e-9 * overall, 1.0)
        self.mu_ = np.array([mu for _, mu, _ in stats])
        self.var_ = np.array([Xc.var(axis=0) + eps for Xc, _, _ in stats])
        self.logprior_ = np.log([p for _, _, p in stats])
        self.n_features_ = X.shape[1]
        self.fitted_ = True
        return self

    def log_odds(self, X):
        self._require_fit()
        ll = [-0.5 * (np.log(2 * np.pi * self.var_[c]) + (X - self.mu_[c]) ** 2 / self.var_[c]).sum(axis=1)
              + self.logprior_[c] for c in (0, 1)]
        return ll[1] - ll[0]

    def _scores(self, X):
        z = self.log_odds(X)
        return np.exp(-np.logaddexp(0.0, -z))


CLASSIFIERS = {
    "RF": RandomForest,
    "SVM": LinearSVM,
    "KNN": KNearestNeighbors,
    "LDA": LDA,
    "QDA": QDA,
    "NB": GaussianNB,
}


def make_classifier(name, seed=0, **params):
    if name not in CLASSIFIERS:
        raise ValueError(f"unknown classifier {name!r}; choose from {sorted(CLASSIFIERS)}")
    cls = CLASSIFIERS[name]
    if name in ("RF", "SVM"):
        params.setdefault("seed", seed)
    return cls(**params)


def predict_proba(model, X):
    """Rank-meaningful scores of a fitted model (not calibrated probabilities)."""
    return model.scores(X)


def fit_predict(name, train, X_test, seed=0, **params):
    """Fit classifier ``name`` on a DatasetMatrix and return (labels, scores)."""
    model = make_classifier(name, seed=seed, **params).fit(train.X, train.y)
    return model.predict(X_test), model.scores(X_test)
