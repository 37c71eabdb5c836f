import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from motionsrf import kernels
from motionsrf.apps.manifest import load_manifest, load_pair
from motionsrf.apps.synth import gen_synthetic_corpus
from motionsrf.config import ForestConfig
from motionsrf.flowio import read_flo, write_flo
from motionsrf.srf import train_forest

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# (criterion, name, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE = []

TWO_CLASS_RULES = ["checkerboard:2,0", "stripes:-2,0"]


@pytest.fixture(params=kernels.available())
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    gen_synthetic_corpus(TWO_CLASS_RULES, out, seed=3, n_pairs=6)
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return [load_pair(e) for e in load_manifest(corpus_dir / "manifest.tsv").entries]


@pytest.fixture(scope="session")
def small_forest(corpus):
    cfg = ForestConfig(n_trees=2, max_leaves=40, node_iters=20, max_samples=200, seed=5)
    return train_forest(corpus, cfg)


def textured(h=32, w=32, seed=0):
    return np.random.default_rng(seed).random((h, w, 3))


def reversed_motion_sequence(out_dir, n_frames=30, bad=17, seed=21):
    """Frames of one moving texture; the measured flow of frame ``bad`` is reversed."""
    manifest = gen_synthetic_corpus(["checkerboard:2,0"], out_dir, seed=seed, n_pairs=n_frames)
    path = manifest.entries[bad].flow
    write_flo(path, -read_flo(path))
    return out_dir / "manifest.tsv"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2d}. {name}: {detail}")
