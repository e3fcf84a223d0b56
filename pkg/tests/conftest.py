import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from psyspeech.corpus import SynthConfig, synth_corpus

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def small_corpus():
    return synth_corpus(SynthConfig(n_families=12, docs_per_family=(1, 3), segments_per_doc=(3, 4)), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_CONFIG = {
    "seed": 3,
    "synth": {"n_families": 24, "docs_per_family": [2, 3], "segments_per_doc": [2, 3],
              "class_priors": [0.4, 0.3, 0.2, 0.1], "duration_s": [0.3, 0.4]},
    "dims": {"lm": 8, "subword": 8, "docvec": 8, "wavenet": 4, "vggish": 4},
    "aux": {"synth_size": 80},
    "k": 3,
    "network": {"hidden_dim": 6, "doc_dim": 6, "fused_dim": 6, "epochs": 3, "compressor_dim": 8,
                "compressor_hidden": 8, "compressor_epochs": 2},
    "emotion": {"dim": 4, "hidden_dim": 4, "epochs": 2},
    "shallow": {"rf_trees": 5, "svm_iter": 200},
}


@pytest.fixture
def tiny_config():
    """A seconds-scale experiment configuration (plain dict, unresolved)."""
    import copy
    return copy.deepcopy(TINY_CONFIG)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
