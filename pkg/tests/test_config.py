import pytest

from ghm.config import RunConfig, config_from_dict, load_config, parse_config
from ghm.errors import ConfigError, MissingInputError


def test_defaults():
    cfg = RunConfig()
    assert cfg.stft.frames == 200 and cfg.mode == "merged" and cfg.pipeline.method == "rumlda"
    assert cfg.split.train_fraction == 0.8 and cfg.synth.counts == (150, 130, 110, 39)


def test_sections_parse():
    cfg = parse_config('{"stft": {"window_len": 126, "frames": 50, "bins": 64}, "pipeline": {"method": "pca", "p": 5}}')
    assert cfg.stft.bins == 64 and cfg.pipeline.p == 5
    cfg = config_from_dict({"synth": {"harmonics": [[5, 1.0]], "counts": [1, 1, 1, 1]}})
    assert cfg.synth.harmonics == ((5.0, 1.0),) and cfg.synth.counts == (1, 1, 1, 1)


def test_unknown_key_reports_its_line():
    text = '{\n  "pipeline": {\n    "method": "pca",\n    "pp": 3\n  }\n}\n'
    with pytest.raises(ConfigError, match=r"cfg\.json:4: unknown key 'pp' in section 'pipeline'"):
        parse_config(text, "cfg.json")


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match=r":2: unknown key 'modes'"):
        parse_config('{\n "modes": "pair"\n}', "c")


def test_invalid_value_is_anchored():
    text = '{\n "split": {\n  "folds": 1\n }\n}'
    with pytest.raises(ConfigError, match=r"c:2: folds must be >= 2"):
        parse_config(text, "c")


def test_json_syntax_error_line():
    with pytest.raises(ConfigError, match=r"c:3: invalid JSON"):
        parse_config('{\n "mode": "pair",\n }', "c")


@pytest.mark.parametrize(
    "d",
    [
        {"mode": "tensor"},
        {"pipeline": {"method": "svd"}},
        {"pipeline": {"svm_scale": "mean"}},
        {"stft": {"bins": 7}},
        {"mode": "vector", "pipeline": {"method": "rumlda"}},
        {"sweep": {"p_min": 4, "p_max": 2}},
        {"pipeline": []},
        {"pipeline": {"p": "three"}},
    ],
)
def test_invalid_configs(d):
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_seed_and_threads_overrides():
    cfg = RunConfig().with_seed(7).with_threads(3)
    assert cfg.synth.seed == 7 and cfg.split.seed == 7 and cfg.pipeline.threads == 3


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingInputError):
        load_config(tmp_path / "nope.json")
    assert load_config(None) == RunConfig()
