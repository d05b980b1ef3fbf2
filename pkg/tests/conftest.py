"""Shared fixtures: small synthetic corpora that exercise the whole pipeline."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from xrayscreen.dataset import write_normalized_store
from xrayscreen.synthetic import make_grating_corpus

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Lines queued by the acceptance tests and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """24 images, 6 per class, 64x64; covid rows carry staged offsets."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    return make_grating_corpus(root, per_class=6, image_size=64,
                               noise_sigma=0.05, seed=11)


@pytest.fixture(scope="session")
def tiny_manifest_path(tiny_corpus):
    return tiny_corpus.root / "manifest.csv"


@pytest.fixture(scope="session")
def tiny_store(tiny_corpus, tmp_path_factory):
    """Normalized 64x64 store built from the tiny corpus."""
    out = tmp_path_factory.mktemp("tiny_store")
    store, failures = write_normalized_store(tiny_corpus, out, image_size=64)
    assert not failures
    return store


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def dyadic_image(rng, rows, cols):
    """Random image whose pixels are multiples of 1/256 (exactly representable)."""
    return np.floor(rng.random((rows, cols)) * 256.0) / 256.0
