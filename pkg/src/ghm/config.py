"""Run configuration: nested dataclasses loaded from JSON with strict key checking."""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, GhmError, MissingInputError
from .evaluation import SplitSpec
from .pipeline import PipelineConfig
from .preprocess import Mode
from .spectrogram import DEFAULT_TRIM, StftConfig
from .synth import SynthConfig


@dataclass(frozen=True)
class SweepConfig:
    p_min: int = 1
    p_max: int = 8

    def __post_init__(self):
        if not 1 <= int(self.p_min) <= int(self.p_max):
            raise ConfigError(f"sweep range must satisfy 1 <= p_min <= p_max, got {self.p_min}..{self.p_max}")


@dataclass(frozen=True)
class ImageConfig:
    transpose: bool = False  # False: frames as rows (w x b); True: bins as rows (b x w)


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    mode: str = "merged"
    trim: float = DEFAULT_TRIM
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    images: ImageConfig = field(default_factory=ImageConfig)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode).label)
        if not 0.0 <= self.trim < 1.0:
            raise ConfigError(f"trim must lie in [0, 1), got {self.trim}")
        if self.pipeline.method == "rumlda" and self.mode == "vector":
            raise ConfigError("rumlda needs merged or pair mode, not vector")

    @property
    def input_mode(self) -> Mode:
        return Mode.parse(self.mode)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["synth"] = self.synth.to_dict()
        return d

    def with_seed(self, seed: int) -> "RunConfig":
        synth = dataclasses.replace(self.synth, seed=int(seed))
        split = dataclasses.replace(self.split, seed=int(seed))
        return dataclasses.replace(self, synth=synth, split=split)

    def with_threads(self, threads: int) -> "RunConfig":
        return dataclasses.replace(self, pipeline=dataclasses.replace(self.pipeline, threads=int(threads)))


_SECTIONS = {
    "synth": SynthConfig,
    "stft": StftConfig,
    "pipeline": PipelineConfig,
    "split": SplitSpec,
    "sweep": SweepConfig,
    "images": ImageConfig,
}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str, source: str) -> str:
    line = _line_of(text, key)
    return f"{source}:{line}" if line else source


def _build(cls, values, text: str, source: str, section: str | None):
    if not isinstance(values, dict):
        raise ConfigError(f"{_where(text, section or '', source)}: section {section!r} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in names:
            where = f" in section {section!r}" if section else ""
            raise ConfigError(
                f"{_where(text, key, source)}: unknown key {key!r}{where}; allowed: {', '.join(sorted(names))}"
            )
    kwargs = {}
    for key, value in values.items():
        if cls is RunConfig and key in _SECTIONS:
            value = _build(_SECTIONS[key], value, text, source, key)
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except GhmError as exc:
        anchor = section or next(iter(values), "")
        raise ConfigError(f"{_where(text, anchor, source)}: {exc}") from None
    except (TypeError, ValueError) as exc:
        anchor = section or next(iter(values), "")
        raise ConfigError(f"{_where(text, anchor, source)}: invalid value: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON (column {exc.colno}): {exc.msg}") from None
    return _build(RunConfig, data, text, source, None)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingInputError(f"config file not found: {path}") from None
    return parse_config(text, str(path))


def config_from_dict(d: dict) -> RunConfig:
    return parse_config(json.dumps(d), "<dict>")
