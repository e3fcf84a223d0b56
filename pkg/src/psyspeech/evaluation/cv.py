"""Family-grouped folds, task construction and training-set oversampling."""

from dataclasses import dataclass

import numpy as np

from ..corpus import DISORDERS


class LeakageError(AssertionError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict  # family_id -> fold index

    def fold_of(self, family_ids):
        return np.array([self.assignment[f] for f in family_ids], dtype=np.int64)

    def splits(self, family_ids, subset=None):
        """``(train, test)`` document-index arrays per fold, optionally
        restricted to the indices in ``subset``."""
        folds = self.fold_of(family_ids)
        idx = np.arange(len(family_ids)) if subset is None else np.asarray(subset, dtype=np.int64)
        out = []
        for f in range(self.k):
            test = idx[folds[idx] == f]
            train = idx[folds[idx] != f]
            assert_no_leakage(train, test, family_ids)
            out.append((train, test))
        return out


def _family_ids(corpus_or_ids):
    if hasattr(corpus_or_ids, "documents"):
        return [d.family_id for d in corpus_or_ids.documents]
    return list(corpus_or_ids)


def grouped_kfold(corpus_or_ids, k=5, seed=0):
    """Shuffle the families with ``seed`` and hand each, in turn, to the fold
    currently holding the fewest documents (lowest index on ties)."""
    fam = _family_ids(corpus_or_ids)
    sizes = {}
    for f in fam:
        sizes[f] = sizes.get(f, 0) + 1
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(sizes) < k:
        raise ValueError(f"{len(sizes)} families cannot fill {k} folds")
    order = sorted(sizes)
    perm = np.random.default_rng(seed).permutation(len(order))
    load = [0] * k
    assignment = {}
    for i in perm:
        f = order[i]
        target = int(np.argmin(load))
        assignment[f] = target
        load[target] += sizes[f]
    return FoldPlan(k, assignment)


def assert_no_leakage(train, test, family_ids):
    fam = np.asarray(family_ids, dtype=object)
    shared = set(fam[np.asarray(train, dtype=np.int64)]) & set(fam[np.asarray(test, dtype=np.int64)])
    if shared:
        raise LeakageError(f"families in both train and test: {sorted(shared)[:5]}")
    if set(np.asarray(train).tolist()) & set(np.asarray(test).tolist()):
        raise LeakageError("documents in both train and test")


def random_oversample(train_indices, labels, seed=0, test_indices=None):
    """Duplicate randomly drawn minority-class training indices until every
    class present in the training set reaches the majority count.

    ``labels`` is indexed by document index.  The originals keep their
    order; duplicates are appended class by class (sorted class order).
    """
    train = np.asarray(train_indices, dtype=np.int64)
    if test_indices is not None and np.intersect1d(train, np.asarray(test_indices, dtype=np.int64)).size:
        raise LeakageError("oversampling input contains test indices")
    lab = np.asarray(labels, dtype=object)[train]
    classes = sorted(set(lab.tolist()))
    if len(classes) < 2:
        raise ValueError("training fold has a single class")
    counts = {c: int((lab == c).sum()) for c in classes}
    target = max(counts.values())
    rng = np.random.default_rng(seed)
    extra = [rng.choice(train[lab == c], size=target - counts[c], replace=True)
             for c in classes if counts[c] < target]
    return np.concatenate([train] + extra) if extra else train.copy()


@dataclass(frozen=True)
class TaskSpec:
    name: str
    positive: frozenset
    negative: frozenset

    def __post_init__(self):
        if self.positive & self.negative:
            raise ValueError("positive and negative classes overlap")

    def members(self, disorders):
        return np.array([d in self.positive or d in self.negative for d in disorders])

    def targets(self, disorders):
        return np.array([1 if d in self.positive else 0 for d in disorders], dtype=np.int64)


TASKS = DISORDERS
FRAMINGS = ("vs_control", "vs_rest")


def make_task(name, framing="vs_control"):
    """``control`` is always control against every disorder.  A disorder task
    is that disorder against control (``vs_control``) or against all other
    documents (``vs_rest``)."""
    if name not in DISORDERS:
        raise ValueError(f"unknown task {name!r}")
    if framing not in FRAMINGS:
        raise ValueError(f"unknown framing {framing!r}")
    others = frozenset(d for d in DISORDERS if d != name)
    if name == "control" or framing == "vs_rest":
        return TaskSpec(name, frozenset([name]), others)
    return TaskSpec(name, frozenset([name]), frozenset(["control"]))
