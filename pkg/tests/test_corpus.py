import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psyspeech import corpus as C
from psyspeech.corpus import (CorpusError, CorpusManifest, DocumentLabels, DocumentRecord, SegmentLabels,
                              SegmentRecord, SynthConfig)


def seg(sid, tokens=("a", "b"), labels=None, audio=None, dur=0.0):
    return SegmentRecord(sid, tuple(tokens), audio, dur, labels)


def doc(did, segs, disorder="control", family="F1", **ratings):
    return DocumentRecord(did, did + "-s", family, tuple(segs), DocumentLabels(disorder, **ratings))


def doc_json(**over):
    d = {
        "document_id": "d1", "subject_id": "p1", "family_id": "f1",
        "labels": {"disorder": "control", "affect": 3, "warmth": 3, "overprotection": 3, "cohesion": 3,
                   "criticism": 3},
        "segments": [{"segment_id": "s1", "tokens": ["hi"], "audio_path": None, "duration_s": 0.0,
                      "labels": None}],
    }
    d.update(over)
    return d


class TestRecords:
    def test_label_vector_has_twelve_dims(self):
        lab = SegmentLabels("subjective", "positive", "joy", cohesion=True, worry=True)
        v = lab.vector()
        assert v.shape == (12,) == (len(C.SEGMENT_LABEL_NAMES),)
        on = {C.SEGMENT_LABEL_NAMES[i] for i in np.flatnonzero(v)}
        assert on == {"subjective", "positive_sentiment", "emotion_joy", "cohesion", "worry"}

    def test_enum_and_rating_validation(self):
        with pytest.raises(CorpusError, match="emotion"):
            SegmentLabels("subjective", "positive", "surprise")
        with pytest.raises(CorpusError, match="warmth"):
            DocumentLabels("control", warmth=0)
        with pytest.raises(CorpusError, match="affect"):
            DocumentLabels("control", affect=True)
        with pytest.raises(CorpusError):
            DocumentLabels("anxiety")

    def test_segment_and_document_invariants(self):
        with pytest.raises(CorpusError):
            SegmentRecord("s", (), None, 0.0)
        with pytest.raises(CorpusError, match="duration_s"):
            SegmentRecord("s", ("a",), "x.wav", 0.0)
        with pytest.raises(CorpusError, match="segments"):
            DocumentRecord("d", "p", "f", (), DocumentLabels("control"))
        with pytest.raises(CorpusError, match="family_id"):
            DocumentRecord("d", "p", "", (seg("s"),), DocumentLabels("control"))

    def test_duplicate_document_ids(self):
        with pytest.raises(CorpusError, match="duplicate"):
            CorpusManifest((doc("d", [seg("s")]), doc("d", [seg("t")])))


class TestLoad:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("")
        assert len(C.load_corpus(p)) == 0

    def test_rating_six_names_field(self, tmp_path):
        d = doc_json()
        d["labels"]["affect"] = 6
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(d) + "\n")
        with pytest.raises(CorpusError, match=r"c\.jsonl:1: .*'affect'"):
            C.load_corpus(p)

    def test_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(doc_json()) + "\n{not json\n")
        with pytest.raises(CorpusError, match=r":2: parse error"):
            C.load_corpus(p)

    def test_duplicate_reports_both_lines(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(doc_json()) + "\n\n" + json.dumps(doc_json()) + "\n")
        with pytest.raises(CorpusError, match=r":3: duplicate document_id 'd1' \(first on line 1\)"):
            C.load_corpus(p)

    def test_bad_segment_field_is_located(self, tmp_path):
        d = doc_json()
        d["segments"].append({"segment_id": "s2", "tokens": "oops"})
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps(d) + "\n")
        with pytest.raises(CorpusError, match=r"segments\[1\]: field 'tokens'"):
            C.load_corpus(p)

    def test_synthetic_roundtrip_is_byte_identical(self, tmp_path):
        m = C.synth_corpus(SynthConfig(n_families=20, docs_per_family=(2, 3)), seed=3)
        assert len(m) >= 40
        first = m
        while len(first) > 50:
            first = CorpusManifest(first.documents[:50])
        C.save_corpus(first, tmp_path / "a.jsonl")
        back = C.load_corpus(tmp_path / "a.jsonl")
        assert back == first
        C.save_corpus(back, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


labels_st = st.one_of(st.none(), st.builds(
    SegmentLabels, st.sampled_from(C.SUBJECTIVITY), st.sampled_from(C.SENTIMENT), st.sampled_from(C.EMOTION),
    st.booleans(), st.booleans(), st.booleans(), st.booleans(), st.booleans()))
token_st = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=6)


@st.composite
def manifests(draw):
    n_docs = draw(st.integers(0, 4))
    docs = []
    for i in range(n_docs):
        segs = []
        for k in range(draw(st.integers(1, 3))):
            has_audio = draw(st.booleans())
            segs.append(SegmentRecord(
                f"d{i}s{k}", tuple(draw(st.lists(token_st, min_size=0 if has_audio else 1, max_size=4))),
                f"a{i}_{k}.wav" if has_audio else None,
                draw(st.floats(0.01, 30.0)) if has_audio else 0.0, draw(labels_st)))
        ratings = {r: draw(st.integers(1, 5)) for r in C.RATINGS}
        docs.append(DocumentRecord(f"d{i}", draw(token_st), f"f{draw(st.integers(0, 2))}", tuple(segs),
                                   DocumentLabels(draw(st.sampled_from(C.DISORDERS)), **ratings)))
    return CorpusManifest(tuple(docs))


@settings(max_examples=40)
@given(manifests())
def test_load_save_roundtrip_property(tmp_path_factory, m):
    p = tmp_path_factory.mktemp("rt") / "m.jsonl"
    C.save_corpus(m, p)
    assert C.load_corpus(p) == m


def recount(m):
    """Brute-force tallies straight from the JSON form."""
    segs = [s for line in C.dumps_corpus(m).splitlines() for s in json.loads(line)["segments"]]
    c = Counter()
    for s in segs:
        if s["labels"]:
            for k, v in s["labels"].items():
                c[(k, v)] += 1
    return segs, c


class TestStats:
    def test_uniform_case(self):
        m = CorpusManifest(tuple(doc(f"d{i}", [seg(f"d{i}s{k}", ("a", "b", "c", "d")) for k in range(3)])
                                 for i in range(2)))
        rows = dict(C.corpus_stats(m))
        assert rows["Total number of segments"] == 6
        assert rows["Average word count in segments"] == 4
        assert rows["Total number of subjects"] == 2
        assert rows["Average length of audio segments (seconds)"] == 0.0

    def test_empty_is_an_error(self):
        with pytest.raises(CorpusError):
            C.corpus_stats(CorpusManifest())

    def test_matches_recount(self):
        m = C.synth_corpus(SynthConfig(n_families=70, with_audio=True), seed=11)
        assert len(m) >= 100
        rows = dict(C.corpus_stats(m))
        segs, c = recount(m)
        assert rows["Total number of segments"] == len(segs)
        assert rows["Average word count in segments"] == pytest.approx(np.mean([len(s["tokens"]) for s in segs]))
        assert rows["Average length of audio segments (seconds)"] == pytest.approx(
            np.mean([s["duration_s"] for s in segs]))
        for e in C.EMOTION:
            assert rows[f"Number of segments with {e} emotion"] == c[("emotion", e)]
        assert rows["Number of subjective segments"] == c[("subjectivity", "subjective")]
        assert rows["Number of cohesive segments"] == c[("cohesion", True)]
        assert rows["Number of ruminated segments"] == c[("rumination", True)]
        assert sum(rows[f"Number of {d} documents"] for d in C.DISORDERS) == len(m)
        # totals equal the sum of per-document recounts
        assert rows["Total number of segments"] == sum(len(d.segments) for d in m.documents)

    def test_stats_csv(self, tmp_path):
        m = C.synth_corpus(SynthConfig(n_families=3, with_audio=False), seed=0)
        C.write_stats_csv(C.corpus_stats(m), tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "attribute,count"


class TestHeatmap:
    def test_only_joy(self):
        lab = SegmentLabels("subjective", "positive", "joy")
        m = CorpusManifest((doc("d", [seg("s1", labels=lab), seg("s2", labels=lab)]),))
        rows, cols, M = C.label_heatmap(m)
        emo = M[rows.index("emotion")]
        assert emo[cols.index("joy")] == 2 and emo.sum() == 2

    def test_segment_matches_tally(self):
        m = C.synth_corpus(SynthConfig(n_families=30, with_audio=False), seed=5)
        rows, cols, M = C.label_heatmap(m, "segment")
        _, c = recount(m)
        expect = np.zeros_like(M)
        for (f, v), n in c.items():
            name = ("true" if v else "false") if isinstance(v, bool) else v
            expect[rows.index(f), cols.index(name)] += n
        np.testing.assert_array_equal(M, expect)
        n_lab = sum(1 for s in m.segments() if s.labels is not None)
        assert np.all(M.sum(axis=1) == n_lab)

    def test_document_level(self):
        m = CorpusManifest((doc("a", [seg("s")], affect=1, warmth=5), doc("b", [seg("t")], affect=1)))
        rows, cols, M = C.label_heatmap(m, "document")
        assert cols == ["1", "2", "3", "4", "5"]
        assert M[rows.index("affect"), 0] == 2
        assert M[rows.index("warmth")].tolist() == [0, 0, 1, 0, 1]

    def test_csv_and_bad_level(self, tmp_path):
        m = C.synth_corpus(SynthConfig(n_families=2, with_audio=False), seed=0)
        C.write_heatmap_csv(C.label_heatmap(m, "document"), tmp_path / "h.csv")
        assert (tmp_path / "h.csv").read_text().splitlines()[0] == "label,1,2,3,4,5"
        with pytest.raises(ValueError):
            C.label_heatmap(m, "family")


def multinomial_nb_accuracy(train_docs, train_y, test_docs, test_y):
    vocab = sorted({t for d in train_docs for t in d})
    idx = {t: i for i, t in enumerate(vocab)}

    def counts(docs):
        X = np.zeros((len(docs), len(vocab)))
        for r, d in enumerate(docs):
            for t in d:
                if t in idx:
                    X[r, idx[t]] += 1
        return X

    X, Xt = counts(train_docs), counts(test_docs)
    y, yt = np.asarray(train_y), np.asarray(test_y)
    scores = []
    for c in (0, 1):
        tc = X[y == c].sum(axis=0) + 1.0
        scores.append(Xt @ np.log(tc / tc.sum()) + np.log(np.mean(y == c)))
    return np.mean((scores[1] > scores[0]) == yt)


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(n_families=5)
        assert C.dumps_corpus(C.synth_corpus(cfg, seed=4)) == C.dumps_corpus(C.synth_corpus(cfg, seed=4))
        assert C.dumps_corpus(C.synth_corpus(cfg, seed=4)) != C.dumps_corpus(C.synth_corpus(cfg, seed=5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(class_priors=(0.5, 0.5, 0.5, 0.0))
        with pytest.raises(ValueError):
            SynthConfig(text_strength=1.5)

    def test_emotion_words_agree_with_labels(self):
        m = C.synth_corpus(SynthConfig(n_families=10, with_audio=False), seed=2)
        for s in m.segments():
            for emo, words in C.EMOTION_WORDS.items():
                assert any(t in words for t in s.tokens) == (s.labels.emotion == emo)

    def test_zero_strength_has_no_markers_or_tones(self):
        m = C.synth_corpus(SynthConfig(n_families=10, text_strength=0.0, audio_strength=0.0), seed=2)
        markers = {t for ms in C.CLASS_MARKERS.values() for t in ms}
        for s in m.segments():
            assert not markers.intersection(s.tokens)
            assert "tone=0.0;" in s.audio_path

    def test_audio_renders(self):
        m = C.synth_corpus(SynthConfig(n_families=1, docs_per_family=(1, 1), segments_per_doc=(1, 1)), seed=0)
        s = next(m.segments())
        a = m.load_audio(s)
        assert a.sample_rate_hz == 8000
        assert a.samples.size == int(round(s.duration_s * 8000))
        np.testing.assert_array_equal(a.samples, m.load_audio(s).samples)

    def test_planted_text_bow_nb_separates_disorder_from_control(self):
        cfg = SynthConfig(n_families=60, text_strength=1.0, audio_strength=0.0, with_audio=False)
        m = C.synth_corpus(cfg, seed=9)
        assert sum(1 for _ in m.segments()) >= 400
        docs = [[t for s in d.segments for t in s.tokens] for d in m.documents]
        y = [int(d.labels.disorder != "control") for d in m.documents]
        fam = np.array([int(d.family_id[1:]) for d in m.documents])
        train, test = fam % 3 != 0, fam % 3 == 0
        acc = multinomial_nb_accuracy([docs[i] for i in np.flatnonzero(train)], np.asarray(y)[train],
                                      [docs[i] for i in np.flatnonzero(test)], np.asarray(y)[test])
        assert acc >= 0.95
