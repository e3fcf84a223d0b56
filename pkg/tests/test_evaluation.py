import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psyspeech.corpus import DISORDERS
from psyspeech.evaluation import (ConfigError, cv, experiment, figures, grouped_kfold, make_task, metrics,
                                  random_oversample, resolve_config)
from psyspeech.evaluation.config import BASELINES, DEFAULT_MODELS, config_hash, defaults, load_config

from oracles import auc_pairs


def fold_sizes(plan, fam):
    return np.bincount(plan.fold_of(fam), minlength=plan.k)


def check_plan(plan, fam):
    sizes = {}
    for f in fam:
        sizes[f] = sizes.get(f, 0) + 1
    assert set(plan.assignment) == set(sizes)
    assert all(0 <= v < plan.k for v in plan.assignment.values())
    counts = fold_sizes(plan, fam)
    assert counts.max() - counts.min() <= max(sizes.values())
    for train, test in plan.splits(fam):
        assert not set(np.asarray(fam, dtype=object)[train]) & set(np.asarray(fam, dtype=object)[test])


class TestFolds:
    def test_singletons(self):
        fam = [f"f{i}" for i in range(10)]
        plan = grouped_kfold(fam, k=5, seed=0)
        assert fold_sizes(plan, fam).tolist() == [2] * 5

    def test_big_family_stays_together(self):
        fam = ["big"] * 40 + [f"f{i}" for i in range(60)]
        plan = grouped_kfold(fam, k=5, seed=1)
        check_plan(plan, fam)
        folds = plan.fold_of(fam)
        assert np.unique(folds[:40]).size == 1

    def test_errors(self):
        with pytest.raises(ValueError):
            grouped_kfold(["a", "b"], k=3)
        with pytest.raises(ValueError):
            grouped_kfold(["a", "b"], k=1)

    def test_accepts_corpus(self, small_corpus):
        plan = grouped_kfold(small_corpus, k=3, seed=0)
        check_plan(plan, [d.family_id for d in small_corpus.documents])

    def test_seed_matters_and_is_deterministic(self):
        fam = [f"f{i % 17}" for i in range(60)]
        assert grouped_kfold(fam, 5, 3) == grouped_kfold(fam, 5, 3)
        assert grouped_kfold(fam, 5, 3).assignment != grouped_kfold(fam, 5, 4).assignment

    @settings(max_examples=100)
    @given(st.lists(st.integers(1, 8), min_size=5, max_size=40), st.integers(2, 5), st.integers(0, 2**31))
    def test_fuzz(self, family_sizes, k, seed):
        fam = [f"f{i}" for i, n in enumerate(family_sizes) for _ in range(n)]
        fam = list(np.random.default_rng(seed).permutation(fam))
        check_plan(grouped_kfold(fam, k=k, seed=seed), fam)

    def test_leakage_detection(self):
        fam = ["a", "a", "b"]
        with pytest.raises(cv.LeakageError):
            cv.assert_no_leakage([0], [1], fam)
        with pytest.raises(cv.LeakageError):
            cv.assert_no_leakage([0, 2], [2], ["a", "b", "c"])


class TestOversample:
    def test_skewed_four_class_counts(self):
        counts = {"control": 129, "depression": 149, "bipolar": 66, "schizophrenia": 19}
        labels = [c for c, n in counts.items() for _ in range(n)]
        train = np.arange(len(labels))
        out = random_oversample(train, labels, seed=0)
        got = {c: int(np.sum(np.asarray(labels, dtype=object)[out] == c)) for c in counts}
        assert got == {c: 149 for c in counts}
        assert out[: len(train)].tolist() == train.tolist()
        extras = out[len(train):]
        lab = np.asarray(labels, dtype=object)
        assert all(lab[i] != "depression" for i in extras)
        assert set(extras.tolist()) <= set(train.tolist())

    def test_balanced_is_identity(self):
        out = random_oversample([3, 1, 2, 0], ["a", "b", "a", "b"])
        assert out.tolist() == [3, 1, 2, 0]

    def test_guards(self):
        with pytest.raises(cv.LeakageError):
            random_oversample([0, 1], ["a", "b", "a"], test_indices=[1, 2])
        with pytest.raises(ValueError):
            random_oversample([0, 1], ["a", "a"])

    @settings(max_examples=100)
    @given(st.lists(st.sampled_from(DISORDERS), min_size=10, max_size=80), st.integers(0, 2**31))
    def test_equalizes_and_leaves_test_alone(self, labels, seed):
        if len(set(labels)) < 2:
            return
        rng = np.random.default_rng(seed)
        idx = rng.permutation(len(labels))
        cut = len(labels) * 3 // 4
        train, test = idx[:cut], idx[cut:]
        if len(set(np.asarray(labels)[train])) < 2:
            return
        test_before = test.copy()
        out = random_oversample(train, labels, seed=seed, test_indices=test)
        lab = np.asarray(labels)[out]
        counts = np.unique(lab, return_counts=True)[1]
        assert np.all(counts == counts.max())
        assert not set(out.tolist()) & set(test.tolist())
        np.testing.assert_array_equal(test, test_before)


class TestTasks:
    def test_control_vs_all(self):
        t = make_task("control")
        assert t.positive == {"control"} and t.negative == set(DISORDERS) - {"control"}

    def test_framings(self):
        assert make_task("bipolar").negative == {"control"}
        assert make_task("bipolar", "vs_rest").negative == {"control", "depression", "schizophrenia"}
        t = make_task("depression")
        np.testing.assert_array_equal(t.members(["control", "bipolar", "depression"]), [True, False, True])
        np.testing.assert_array_equal(t.targets(["control", "depression"]), [0, 1])

    def test_errors(self):
        with pytest.raises(ValueError):
            make_task("anxiety")
        with pytest.raises(ValueError):
            make_task("control", "one_vs_one")
        with pytest.raises(ValueError):
            cv.TaskSpec("x", frozenset("a"), frozenset("a"))


class TestMetrics:
    def test_accuracy_and_confusion(self):
        cm = metrics.confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 1, 1)
        assert cm.accuracy == metrics.accuracy([1, 1, 0, 0, 1], [1, 0, 0, 1, 1]) == 0.6

    def test_perfect_and_constant(self):
        assert metrics.auc_trapezoid([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert metrics.auc_trapezoid([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(ValueError):
            metrics.roc_auc([0.1, 0.2], [1, 1])

    def test_roc_is_monotone_with_endpoints(self, rng):
        r = metrics.roc_curve(rng.normal(size=50), rng.integers(0, 2, 50))
        assert (r.fpr[0], r.tpr[0], r.fpr[-1], r.tpr[-1]) == (0.0, 0.0, 1.0, 1.0)
        assert np.all(np.diff(r.fpr) >= 0) and np.all(np.diff(r.tpr) >= 0)
        assert r.thresholds[0] == np.inf

    def test_matches_pair_oracle(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=200)
        y = rng.integers(0, 2, 200)
        assert abs(metrics.auc_trapezoid(s, y) - auc_pairs(s, y)) < 1e-12

    @given(st.lists(st.tuples(st.integers(0, 4), st.booleans()), min_size=2, max_size=60))
    def test_exact_equality_with_ties(self, pairs):
        s = [float(a) for a, _ in pairs]
        y = [int(b) for _, b in pairs]
        if 0 < sum(y) < len(y):
            assert metrics.auc_trapezoid(s, y) == auc_pairs(s, y) == metrics.auc_pairs(s, y)

    def test_binomial_band(self):
        lo, hi = metrics.binomial_band(0.5, 100)
        assert (lo, hi) == pytest.approx((0.35, 0.65))


class TestConfig:
    def test_seed_required(self):
        with pytest.raises(ConfigError, match="seed"):
            resolve_config({})

    def test_unknown_key_and_types(self):
        with pytest.raises(ConfigError, match="network.depth"):
            resolve_config({"seed": 0, "network": {"depth": 3}})
        with pytest.raises(ConfigError):
            resolve_config({"seed": 0, "k": "5"})
        with pytest.raises(ConfigError):
            resolve_config({"seed": True})
        with pytest.raises(ConfigError):
            resolve_config({"seed": 0, "models": ["RF", "RF"]})
        with pytest.raises(ConfigError):
            resolve_config({"seed": 0, "fusion": {"strategy": "segment", "precomputed": True}})

    def test_missing_path(self, tmp_path):
        with pytest.raises(ConfigError, match="corpus"):
            resolve_config({"seed": 0, "corpus": "nope.jsonl"}, base_dir=tmp_path)
        cfg = resolve_config({"seed": 0, "corpus": "nope.jsonl"}, base_dir=tmp_path, check_paths=False)
        assert cfg["corpus"] == str(tmp_path / "nope.jsonl")

    def test_defaults_and_hash(self):
        cfg = resolve_config({"seed": 1})
        assert cfg["models"] == list(DEFAULT_MODELS)
        assert cfg["k"] == 5 and cfg["framing"] == "vs_control"
        assert config_hash(cfg) == config_hash(resolve_config({"seed": 1}))
        assert config_hash(cfg) != config_hash(resolve_config({"seed": 2}))
        assert defaults()["seed"] is None

    def test_load_config(self, tmp_path):
        (tmp_path / "c.json").write_text("{bad")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "c.json")
        (tmp_path / "c.json").write_text(json.dumps({"seed": 4}))
        assert load_config(tmp_path / "c.json")["seed"] == 4


class TestCellSeed:
    def test_stable_and_distinct(self):
        a = experiment.cell_seed(0, "control", "text", 1)
        assert a == experiment.cell_seed(0, "control", "text", 1)
        assert a != experiment.cell_seed(0, "control", "text", 2)
        assert 0 <= a < 2**31


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    from conftest import TINY_CONFIG
    cfg = resolve_config(TINY_CONFIG, check_paths=False)
    corpus = experiment.load_run_corpus(cfg)
    report = experiment.run_experiment(corpus, cfg)
    out = tmp_path_factory.mktemp("run")
    experiment.write_report(report, corpus, out)
    return cfg, corpus, report, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestExperiment:
    def test_table_structure(self, tiny_run):
        cfg, _, _, out = tiny_run
        rows = read_csv(out / "table2.csv")
        assert rows[0] == ["model"] + [f"{t} {m}" for t in ("Control", "Depression", "Bipolar", "Schizophrenia")
                                       for m in ("Text", "Audio", "Multi")]
        assert [r[0] for r in rows[1:]] == list(DEFAULT_MODELS) + list(BASELINES)
        for r in rows[1:]:
            assert len(r) == 13
            if r[0] in BASELINES:
                assert [r[1 + 3 * t + 1] for t in range(4)] == ["-"] * 4
                assert [r[1 + 3 * t + 2] for t in range(4)] == ["-"] * 4
            else:
                assert all(v != "-" for v in r[1:])

    def test_no_missing_cells(self, tiny_run):
        assert tiny_run[2].missing == []
        assert read_csv(tiny_run[3] / "missing.csv") == [["task", "modality", "model", "reason"]]

    def test_every_document_evaluated_once_per_cell(self, tiny_run):
        cfg, _, report, _ = tiny_run
        disorders = report.features.disorders
        for (task, _, _), c in report.cells.items():
            members = np.flatnonzero(make_task(task, cfg["framing"]).members(disorders))
            np.testing.assert_array_equal(np.sort(c.doc_idx), members)
            assert c.confusion.n == members.size
            assert c.accuracy == pytest.approx((c.confusion.tp + c.confusion.tn) / c.confusion.n)

    def test_pooled_accuracy_and_folds(self, tiny_run):
        cfg, _, report, _ = tiny_run
        c = report.cells[("control", "text", "RF")]
        assert len(c.fold_accuracy) == cfg["k"]
        assert 0 <= c.accuracy <= 1

    def test_roc_files(self, tiny_run):
        _, _, _, out = tiny_run
        rows = read_csv(out / "roc_control.csv")
        assert rows[0] == ["modality", "model", "fpr", "tpr", "threshold"]
        lstm_text = [r for r in rows[1:] if r[:2] == ["text", "LSTM"]]
        assert lstm_text[0][2:4] == ["0.0", "0.0"] and lstm_text[-1][2:4] == ["1.0", "1.0"]
        assert (out / "roc_control.svg").read_text().startswith("<?xml")

    def test_attention_and_gates(self, tiny_run):
        _, _, report, out = tiny_run
        by_doc = {}
        for t, i, k, w in report.attention:
            by_doc.setdefault((t, i), []).append(w)
        for ws in by_doc.values():
            assert abs(sum(ws) - 1) < 1e-12 and min(ws) >= 0
        assert all(0 < v < 1 for *_, v in report.gates)
        assert {name for _, _, name, _ in report.gates} == {"language", "acoustic"}
        assert read_csv(out / "attention.csv")[0] == ["task", "document_id", "segment_id", "weight"]

    def test_timeline(self, tiny_run):
        _, corpus, report, out = tiny_run
        rows = read_csv(out / "timeline.csv")[1:]
        assert len(rows) == sum(len(d.segments) for d in corpus.documents)
        doc0 = corpus.documents[0]
        mine = [r for r in rows if r[0] == doc0.document_id]
        assert len(mine) == len(doc0.segments)
        starts = [float(r[3]) for r in mine]
        np.testing.assert_allclose(starts, np.concatenate([[0], np.cumsum([s.duration_s for s in doc0.segments])[:-1]]))
        assert all(r[5] in ("neutral", "anger", "fear", "joy", "sadness") for r in rows)

    def test_run_record(self, tiny_run):
        cfg, _, _, out = tiny_run
        rec = json.loads((out / "run.json").read_text())
        assert rec["seed"] == cfg["seed"] and rec["config_hash"] == config_hash(cfg)
        assert set(rec["versions"]) == {"psyspeech", "numpy", "python"}

    def test_stats_and_heatmaps_written(self, tiny_run):
        out = tiny_run[3]
        for name in ("stats.csv", "heatmap_segment.csv", "heatmap_document.csv", "heatmap_segment.svg",
                     "averages.csv", "cells.csv", "folds.csv", "gates.csv"):
            assert (out / name).exists()

    def test_segment_strategy_and_precomputed(self):
        from conftest import TINY_CONFIG
        for fusion in ({"strategy": "segment"}, {"precomputed": True}):
            user = dict(TINY_CONFIG, tasks=["control"], models=["LSTM", "RF"], baselines=False, fusion=fusion)
            cfg = resolve_config(user, check_paths=False)
            report = experiment.run_experiment(experiment.load_run_corpus(cfg), cfg)
            assert report.missing == []
            if fusion.get("strategy") == "segment":
                assert all(name.startswith("segment_") for _, _, name, _ in report.gates)

    def test_single_class_fold_is_recorded(self):
        from conftest import TINY_CONFIG
        user = dict(TINY_CONFIG, tasks=["schizophrenia"], modalities=["text"], models=["RF"],
                    synth=dict(TINY_CONFIG["synth"], class_priors=[0.5, 0.49, 0.0, 0.01], n_families=10))
        cfg = resolve_config(user, check_paths=False)
        report = experiment.run_experiment(experiment.load_run_corpus(cfg), cfg)
        assert report.missing
        header, rows = experiment.table2_rows(report)
        assert "n/a" in rows[0]


class TestFigures:
    def test_all_neutral_timeline_is_white(self):
        svg = figures.timeline_svg([(0.0, 1.0, "neutral"), (1.0, 2.0, "neutral")])
        fills = [part.split('"')[0] for part in svg.split('fill="')[1:]]
        assert fills == ["#ffffff", "#ffffff"]

    def test_svg_deterministic(self):
        a = figures.roc_svg([("text", [0, 0.5, 1], [0, 0.7, 1], 0.8)], "t")
        b = figures.roc_svg([("text", [0, 0.5, 1], [0, 0.7, 1], 0.8)], "t")
        assert a == b and a.startswith('<?xml version="1.0"')

    def test_attention_opacity(self):
        svg = figures.attention_svg([("a", 0.2), ("b", 0.8)])
        assert 'fill-opacity="0.2500"' in svg and 'fill-opacity="1.0000"' in svg
