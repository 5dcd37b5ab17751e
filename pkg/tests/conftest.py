import numpy as np
import pytest

from cityid.harness.synth import SynthSpec, generate_synthetic_corpus

# filled by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


TINY_SPEC = SynthSpec(
    n_classes=10, n_cities=3, videos_per_city=4, seed=7, duration_range=(2.0, 3.0),
    exemplars_per_class=2, exemplar_duration_range=(1.0, 1.5),
)

# small enough that a full run takes seconds
TINY_CONFIG = (
    "mlp_epochs = 2\n"
    "mlp_hidden = 16,16\n"
    "mlp_max_frames_per_video = 40\n"
    "rf_max_frames_per_video = 40\n"
    "n_trees = 5\n"
    "sizes_plan = 2:2,10:1\n"
)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    corpus = generate_synthetic_corpus(TINY_SPEC, root)
    cfg = root / "tiny.cfg"
    cfg.write_text(
        f"urbansound_manifest = {corpus.urbansound_manifest}\n"
        f"train_manifest = {corpus.city_manifest}\n"
        "train_fraction = 0.5\n" + TINY_CONFIG
    )
    return corpus, cfg
