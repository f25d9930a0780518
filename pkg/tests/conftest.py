import numpy as np
import pytest

from tune_probe import synth_corpus
from tune_probe.latent_store import load_corpus

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


SIMPLE_TEXTGRID = '''File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 2.1
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 2.1
        intervals: size = 4
        intervals [1]:
            xmin = 0
            xmax = 0.5
            text = "they"
        intervals [2]:
            xmin = 0.5
            xmax = 1.0
            text = "honored"
        intervals [3]:
            xmin = 1.0
            xmax = 1.9
            text = "Melanie"
        intervals [4]:
            xmin = 1.9
            xmax = 2.1
            text = ""
'''


@pytest.fixture
def simple_textgrid_text():
    return SIMPLE_TEXTGRID


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small but realistic corpus: 3 speakers x 8 tunes x 3 utterances."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    manifest_path = synth_corpus.generate_corpus(
        out, n_speakers=3, utts_per_speaker_per_tune=3, d=24, seed=7,
        nuisance_dims=3, noise_sd=0.02,
    )
    return manifest_path


@pytest.fixture(scope="session")
def tiny_manifest(tiny_corpus):
    return load_corpus(tiny_corpus)


def rng(seed=0):
    return np.random.default_rng(seed)
