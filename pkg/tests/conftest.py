import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ghm.preprocess import assemble_many
from ghm.spectrogram import StftConfig
from ghm.synth import SynthConfig, gen_dataset

settings.register_profile("ghm", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ghm")

# acceptance-scale layout: 50 frames x 64 one-sided bins
REDUCED_STFT = StftConfig(window_len=126, frames=50, bins=64)


@pytest.fixture(scope="session")
def reduced_stft():
    return REDUCED_STFT


@pytest.fixture(scope="session")
def corpus():
    """Default 429-observation synthetic corpus (seed 42)."""
    return gen_dataset(SynthConfig())


@pytest.fixture(scope="session")
def merged_maps(corpus):
    return assemble_many(corpus.observations, REDUCED_STFT, "merged"), corpus.labels


@pytest.fixture(scope="session")
def small_corpus():
    """Smaller corpus for quick end-to-end checks."""
    ds = gen_dataset(SynthConfig(counts=(24, 24, 24, 16)))
    return assemble_many(ds.observations, REDUCED_STFT, "merged"), ds.labels


def random_spd(rng, n, cond=1e3):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = np.geomspace(1.0, cond, n) * rng.uniform(0.5, 2.0)
    return (q * vals) @ q.T


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
