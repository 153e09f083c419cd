import numpy as np
import pytest

from ghm.errors import ConfigError
from ghm.evaluation import confusion_and_f1
from ghm.pipeline import PipelineConfig, fit_pipeline
from ghm.preprocess import assemble_many
from ghm.spectrogram import StftConfig, observation_spectrograms
from ghm.synth import (
    CLASSES,
    DEFAULT_COUNTS,
    GHOST_RATIO,
    SynthConfig,
    class_index,
    gen_components,
    gen_dataset,
    gen_observation,
    separability_ratio,
    signal_checksum,
)

from conftest import REDUCED_STFT

FINE = StftConfig(window_len=512, frames=50, bins=257)


def _bin(freq, cfg=FINE, fs=25000.0):
    return freq * cfg.window_len / fs


def test_default_counts_total():
    assert sum(DEFAULT_COUNTS) == 429
    assert DEFAULT_COUNTS[3] == min(DEFAULT_COUNTS)


def test_same_key_same_signal():
    a = gen_observation("NOK2", SynthConfig(), 7)
    b = gen_observation(2, SynthConfig(), 7)
    np.testing.assert_array_equal(a.spindle, b.spindle)
    assert signal_checksum(a) == signal_checksum(b)
    assert signal_checksum(a) != signal_checksum(gen_observation(2, SynthConfig(), 8))


def test_generation_order_does_not_matter():
    cfg = SynthConfig(counts=(3, 3, 3, 3))
    ds = gen_dataset(cfg)
    np.testing.assert_array_equal(ds.observations[7].spindle, gen_observation(2, cfg, 1).spindle)


def test_counts_and_labels_honoured():
    ds = gen_dataset(SynthConfig(counts=(2, 0, 3, 1)))
    np.testing.assert_array_equal(ds.labels, [0, 0, 2, 2, 2, 3])
    assert [o.meta["class"] for o in ds.observations] == ["OK", "OK", "NOK2", "NOK2", "NOK2", "NOK3"]


@pytest.mark.parametrize(
    "kw", [dict(counts=(0, 0, 0, 0)), dict(counts=(1, 2)), dict(rotation_hz=1000.0), dict(duration=0.0)]
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_unknown_class():
    with pytest.raises(ConfigError):
        class_index("NOK4")
    with pytest.raises(ConfigError):
        class_index(4)
    assert class_index("nok1") == 1


def test_clean_ok_energy_sits_at_harmonic_bins():
    cfg = SynthConfig(noise_sigma=0.0)
    sp, _ = observation_spectrograms(gen_observation("OK", cfg, 0), FINE)
    power = (sp**2).mean(axis=0)
    idx = np.arange(power.size)
    mask = np.zeros(power.size, bool)
    for mult, _ in cfg.harmonics:
        k = _bin(mult * cfg.rotation_hz)
        near = np.abs(idx - k) <= 3
        mask |= near
        # the local maximum near each harmonic sits on its nearest bin
        assert idx[near][np.argmax(power[near])] == round(k)
    # private spindle tone band
    lo, hi = _bin(17.0 * cfg.rotation_hz), _bin(18.0 * cfg.rotation_hz)
    mask |= (idx >= lo - 3) & (idx <= hi + 3)
    assert power[mask].sum() / power.sum() >= 0.95


def test_clean_ghost_difference_is_localized():
    cfg = SynthConfig(noise_sigma=0.0, jitter=0.0)
    ok, _ = observation_spectrograms(gen_observation("OK", cfg, 0), FINE)
    nok1, _ = observation_spectrograms(gen_observation("NOK1", cfg, 0), FINE)
    diff = np.abs(nok1 - ok).max(axis=0)
    k = _bin(GHOST_RATIO * cfg.rotation_hz)
    outside = np.abs(np.arange(diff.size) - k) > 3
    assert diff[~outside].max() > 0
    # only window-sidelobe leakage remains away from the ghost tone
    assert diff[outside].max() <= 0.01 * diff.max()


def test_ghost_grows_late():
    cfg = SynthConfig(noise_sigma=0.0, jitter=0.0)
    ok, _ = observation_spectrograms(gen_observation("OK", cfg, 0), FINE)
    nok1, _ = observation_spectrograms(gen_observation("NOK1", cfg, 0), FINE)
    k = round(_bin(GHOST_RATIO * cfg.rotation_hz))
    growth = nok1[:, k] - ok[:, k]
    frames = growth.size
    assert growth[-1] > 5 * growth[: int(0.6 * frames)].max()


def test_channel_correlation():
    cfg = SynthConfig()
    for cls in range(1, 4):
        obs = gen_observation(cls, cfg, 0)
        assert np.corrcoef(obs.spindle, obs.tailstock)[0, 1] > 0.5
        parts = gen_components(cls, cfg, 0)
        assert abs(np.corrcoef(parts.private_sp, parts.private_tl)[0, 1]) < 0.2


def test_signals_finite_and_clipped():
    cfg = SynthConfig(clip=2.0)
    for cls in range(4):
        obs = gen_observation(cls, cfg, 1)
        for ch in (obs.spindle, obs.tailstock):
            assert np.all(np.isfinite(ch)) and np.abs(ch).max() <= 2.0


def test_default_corpus_separability(corpus):
    full = assemble_many(corpus.observations, None, "merged")
    assert separability_ratio(full, corpus.labels) >= 3.0


def test_reduced_corpus_separability(merged_maps):
    maps, labels = merged_maps
    assert separability_ratio(maps, labels) >= 3.0


def test_classifier_generalizes_across_seeds():
    counts = (30, 30, 30, 15)
    a = gen_dataset(SynthConfig(seed=1, counts=counts))
    b = gen_dataset(SynthConfig(seed=2, counts=counts))
    xa = assemble_many(a.observations, REDUCED_STFT, "merged")
    xb = assemble_many(b.observations, REDUCED_STFT, "merged")
    model = fit_pipeline(xa, a.labels, PipelineConfig(method="rumlda", p=3))
    report = confusion_and_f1(model.predict(xb), b.labels, np.arange(len(CLASSES)))
    assert report.accuracy >= 0.99
