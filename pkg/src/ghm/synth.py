"""Deterministic synthetic two-channel honing vibration signals.

All frequencies here are synthetic stand-ins chosen to give each quality
class a distinct time-frequency signature:

* OK   - harmonics of the workpiece rotation under a piecewise-linear
         finishing / spark-out envelope.
* NOK1 - adds a non-harmonic "ghost" tone (7.37 x rotation) whose amplitude
         grows over the last 30 % of the observed window.
* NOK2 - adds a low-frequency band (tones at 1.5 and 3 x rotation) for the
         whole cycle.
* NOK3 - adds one decaying resonance burst per revolution, which shows up as
         rotation-spaced sidebands around the burst carrier.

The tailstock channel receives the shared content attenuated, plus its own
noise and a private tone. Random streams come from numpy's PCG64 seeded
with ``SeedSequence([seed, class_index, index])``, so each observation is
reproducible on its own and generation order does not matter.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .spectrogram import DEFAULT_SAMPLE_RATE, DEFAULT_TRIM, RawObservation

CLASSES = ("OK", "NOK1", "NOK2", "NOK3")
DEFAULT_COUNTS = (150, 130, 110, 39)

GHOST_RATIO = 7.37
BURST_CARRIER_RATIO = 22.5
BURST_SIDEBANDS = 3
BAND_RATIOS = (1.5, 3.0)
PRIVATE_RATIOS = (17.5, 28.5)


def class_index(label) -> int:
    if isinstance(label, str):
        try:
            return CLASSES.index(label.upper().replace(" ", ""))
        except ValueError:
            raise ConfigError(f"unknown class {label!r}; expected one of {CLASSES}") from None
    idx = int(label)
    if not 0 <= idx < len(CLASSES):
        raise ConfigError(f"class index {idx} outside 0..{len(CLASSES) - 1}")
    return idx


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: float = DEFAULT_SAMPLE_RATE
    duration: float = 0.5
    rotation_hz: float = 400.0
    harmonics: tuple = ((5, 1.00), (10, 0.60), (15, 0.35))
    noise_sigma: float = 0.05
    jitter: float = 1.0  # scales every random per-observation variation below
    speed_jitter: float = 0.001
    amp_jitter: float = 0.05
    defect_jitter: float = 0.05
    wobble: float = 0.03
    random_phase: bool = True
    private_jitter: float = 0.5
    tail_gain: float = 0.6
    private_amp: float = 0.5
    clip: float = 20.0
    ghost_amp: float = 2.0
    band_amp: float = 1.5
    burst_amp: float = 5.0
    burst_decay: float = 4e-4  # seconds
    counts: tuple = DEFAULT_COUNTS
    seed: int = 42
    trim: float = DEFAULT_TRIM

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be positive")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        top = max([m for m, _ in self.harmonics] + [BURST_CARRIER_RATIO + BURST_SIDEBANDS, PRIVATE_RATIOS[1] + 1])
        if not 0 < self.rotation_hz * top < self.sample_rate / 2:
            raise ConfigError(f"rotation_hz={self.rotation_hz} puts components above Nyquist (highest ratio {top})")
        if len(self.counts) != len(CLASSES) or any(int(c) < 0 for c in self.counts):
            raise ConfigError(f"counts must list {len(CLASSES)} non-negative integers")
        if sum(int(c) for c in self.counts) == 0:
            raise ConfigError("dataset would be empty: all class counts are zero")
        if self.noise_sigma < 0 or self.jitter < 0:
            raise ConfigError("noise_sigma and jitter must be non-negative")
        object.__setattr__(self, "harmonics", tuple((float(m), float(a)) for m, a in self.harmonics))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["harmonics"] = [list(h) for h in self.harmonics]
        d["counts"] = list(self.counts)
        return d


def stream(seed: int, cls: int, index: int) -> np.random.Generator:
    """Independent generator for one observation."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(cls), int(index)])))


def process_envelope(t: np.ndarray, duration: float) -> np.ndarray:
    """Roughing -> finishing -> spark-out amplitude trend (piecewise linear)."""
    knots = np.array([0.0, 0.4, 0.8, 1.0]) * duration
    levels = np.array([1.6, 1.0, 0.8, 0.6])
    return np.interp(t, knots, levels)


def final_ramp(t: np.ndarray, duration: float, trim: float, share: float = 0.3) -> np.ndarray:
    """0 before the last ``share`` of the observed window, then linear growth to 1."""
    start = duration * (trim + (1.0 - trim) * (1.0 - share))
    return np.clip((t - start) / (duration - start), 0.0, 1.0)


@dataclass
class Components:
    """Per-channel signal parts; the channel signal is their sum."""

    shared: np.ndarray
    defect: np.ndarray
    private_sp: np.ndarray
    private_tl: np.ndarray
    extras: dict = field(default_factory=dict)


def gen_components(label, cfg: SynthConfig, index: int) -> Components:
    cls = class_index(label)
    rng = stream(cfg.seed, cls, index)
    j = cfg.jitter
    fs = cfg.sample_rate
    n = cfg.n_samples
    t = np.arange(n) / fs
    rot = cfg.rotation_hz * (1.0 + cfg.speed_jitter * j * rng.standard_normal())
    ph = j if cfg.random_phase else 0.0
    env = process_envelope(t, cfg.duration)

    shared = np.zeros(n)
    for mult, amp in cfg.harmonics:
        a = amp * max(0.0, 1.0 + cfg.amp_jitter * j * rng.standard_normal())
        phase = ph * rng.uniform(0, 2 * np.pi)
        # slow per-harmonic amplitude wobble
        wob = 1.0 + cfg.wobble * j * np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * t + ph * rng.uniform(0, 2 * np.pi))
        shared += a * wob * np.sin(2 * np.pi * mult * rot * t + phase)
    shared *= env

    defect = np.zeros(n)
    if cls == 1:
        a = cfg.ghost_amp * max(0.0, 1.0 + cfg.defect_jitter * j * rng.standard_normal())
        ramp = 0.1 + 0.9 * final_ramp(t, cfg.duration, cfg.trim)
        defect = a * ramp * np.sin(2 * np.pi * GHOST_RATIO * rot * t + ph * rng.uniform(0, 2 * np.pi))
    elif cls == 2:
        a = cfg.band_amp * max(0.0, 1.0 + cfg.defect_jitter * j * rng.standard_normal())
        freqs = rot * np.array(BAND_RATIOS)
        phases = ph * rng.uniform(0, 2 * np.pi, len(freqs))
        defect = a * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).sum(axis=0)
    elif cls == 3:
        a = cfg.burst_amp * max(0.0, 1.0 + cfg.defect_jitter * j * rng.standard_normal())
        period = 1.0 / rot
        offset = ph * rng.uniform(0, period)
        phase_in_rev = np.mod(t - offset, period)
        carrier = np.sin(2 * np.pi * BURST_CARRIER_RATIO * rot * t)
        defect = a * np.exp(-phase_in_rev / cfg.burst_decay) * carrier
    defect = defect * env if cls == 2 else defect

    f_sp = rot * (PRIVATE_RATIOS[0] + cfg.private_jitter * j * rng.uniform(-1, 1))
    f_tl = rot * (PRIVATE_RATIOS[1] + cfg.private_jitter * j * rng.uniform(-1, 1))
    private_sp = cfg.private_amp * np.sin(2 * np.pi * f_sp * t + ph * rng.uniform(0, 2 * np.pi))
    private_tl = cfg.private_amp * np.sin(2 * np.pi * f_tl * t + ph * rng.uniform(0, 2 * np.pi))
    private_sp = private_sp + cfg.noise_sigma * rng.standard_normal(n)
    private_tl = private_tl + cfg.noise_sigma * rng.standard_normal(n)
    return Components(shared=shared, defect=defect, private_sp=private_sp, private_tl=private_tl)


def gen_observation(label, cfg: SynthConfig | None = None, index: int = 0) -> RawObservation:
    """One two-channel observation, deterministic in ``(cfg.seed, label, index)``."""
    cfg = cfg or SynthConfig()
    parts = gen_components(label, cfg, index)
    common = parts.shared + parts.defect
    sp = np.clip(common + parts.private_sp, -cfg.clip, cfg.clip)
    tl = np.clip(cfg.tail_gain * common + parts.private_tl, -cfg.clip, cfg.clip)
    return RawObservation(
        sp,
        tl,
        cfg.sample_rate,
        meta={"class": CLASSES[class_index(label)], "index": int(index), "seed": int(cfg.seed), "synthetic": True},
    )


@dataclass
class LabeledDataset:
    observations: list
    labels: np.ndarray  # class indices into CLASSES
    config: SynthConfig

    def __len__(self) -> int:
        return len(self.observations)


def gen_dataset(cfg: SynthConfig | None = None) -> LabeledDataset:
    """Observations grouped by class (OK first), ``counts[k]`` of class ``k``."""
    cfg = cfg or SynthConfig()
    obs = []
    labels = []
    for cls, count in enumerate(cfg.counts):
        for i in range(count):
            obs.append(gen_observation(cls, cfg, i))
            labels.append(cls)
    return LabeledDataset(obs, np.array(labels, dtype=np.int64), cfg)


def signal_checksum(raw: RawObservation) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(raw.spindle, dtype="<f4").tobytes())
    h.update(np.asarray(raw.tailstock, dtype="<f4").tobytes())
    return h.hexdigest()


def separability_ratio(maps, labels) -> float:
    """Smallest distance between class-mean maps over the RMS within-class distance."""
    x = np.asarray(maps, dtype=float).reshape(len(maps), -1)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    means = np.stack([x[labels == c].mean(axis=0) for c in classes])
    within = np.sqrt(np.mean([np.sum((x[i] - means[np.searchsorted(classes, labels[i])]) ** 2) for i in range(len(x))]))
    between = min(
        np.linalg.norm(means[a] - means[b]) for a in range(len(classes)) for b in range(a + 1, len(classes))
    )
    return float(between / within)
