"""Short-time Fourier magnitude spectrograms of two-channel vibration signals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

DEFAULT_SAMPLE_RATE = 25_000.0
DEFAULT_TRIM = 0.40

_WINDOWS = ("hamming", "hann", "rect")


@dataclass(frozen=True)
class StftConfig:
    """Frame layout of a spectrogram.

    ``bins`` equal to ``window_len`` keeps the full two-sided magnitude
    spectrum; ``window_len // 2 + 1`` keeps only the one-sided half.
    """

    window_len: int = 512
    frames: int = 200
    bins: int = 512
    window: str = "hamming"

    def __post_init__(self):
        if self.window_len < 2:
            raise ConfigError(f"window_len must be >= 2, got {self.window_len}")
        if self.frames < 2:
            raise ConfigError(f"frames must be >= 2, got {self.frames}")
        if self.bins not in (self.window_len, self.window_len // 2 + 1):
            raise ConfigError(
                f"bins must be {self.window_len} (two-sided) or {self.window_len // 2 + 1} (one-sided), got {self.bins}"
            )
        if self.window not in _WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}; expected one of {_WINDOWS}")

    @property
    def two_sided(self) -> bool:
        return self.bins == self.window_len

    def min_length(self) -> int:
        """Shortest signal that yields ``frames`` frames with hop >= 1."""
        return self.window_len + self.frames - 1

    def hop(self, length: int) -> int:
        return (length - self.window_len) // (self.frames - 1)


@dataclass(frozen=True)
class RawObservation:
    spindle: np.ndarray
    tailstock: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sp = np.asarray(self.spindle, dtype=float)
        tl = np.asarray(self.tailstock, dtype=float)
        if sp.ndim != 1 or tl.shape != sp.shape:
            raise DimensionError(f"channels must be equal-length 1-D sequences, got {sp.shape} and {tl.shape}")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "spindle", sp)
        object.__setattr__(self, "tailstock", tl)

    def __len__(self) -> int:
        return self.spindle.shape[0]


def window_coefficients(name: str, length: int) -> np.ndarray:
    """Symmetric taper of ``length`` points; Hamming is ``0.54 - 0.46 cos(2 pi n / (L - 1))``."""
    n = np.arange(length)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / (length - 1))
    if name == "rect":
        return np.ones(length)
    raise ConfigError(f"unknown window {name!r}")


def frame_signal(signal, cfg: StftConfig) -> np.ndarray:
    """Stack of ``cfg.frames`` untapered frames, shape ``(frames, window_len)``."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"signal must be 1-D, got shape {x.shape}")
    if x.shape[0] < cfg.window_len:
        raise ConfigError(f"signal of {x.shape[0]} samples is shorter than the {cfg.window_len}-point window")
    hop = cfg.hop(x.shape[0])
    if hop < 1:
        raise ConfigError(
            f"signal of {x.shape[0]} samples cannot hold {cfg.frames} frames of {cfg.window_len} "
            f"(need >= {cfg.min_length()})"
        )
    starts = np.arange(cfg.frames) * hop
    idx = starts[:, None] + np.arange(cfg.window_len)[None, :]
    return x[idx]


def stft(signal, cfg: StftConfig | None = None) -> np.ndarray:
    """Magnitude spectrogram of shape ``(frames, bins)``.

    Frame ``j`` covers samples ``[j*hop, j*hop + window_len)`` with
    ``hop = (len - window_len) // (frames - 1)``; no zero padding is applied.
    """
    cfg = cfg or StftConfig()
    frames = frame_signal(signal, cfg) * window_coefficients(cfg.window, cfg.window_len)
    if cfg.two_sided:
        spec = np.fft.fft(frames, axis=1)
    else:
        spec = np.fft.rfft(frames, axis=1)
    return np.abs(spec)


def trim_observation(signal, fraction: float = DEFAULT_TRIM) -> np.ndarray:
    """Drop the leading ``fraction`` of a signal.

    The retained length is ``ceil((1 - fraction) * n)``, computed as
    ``n - floor(fraction * n)``.
    """
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"trim fraction must lie in [0, 1), got {fraction}")
    x = np.asarray(signal)
    n = x.shape[0]
    drop = int(np.floor(fraction * n))
    return x[drop:]


def observation_spectrograms(
    raw: RawObservation, cfg: StftConfig | None = None, trim: float = DEFAULT_TRIM
) -> tuple[np.ndarray, np.ndarray]:
    """(spindle, tailstock) spectrograms after trimming the roughing phase."""
    cfg = cfg or StftConfig()
    return (
        stft(trim_observation(raw.spindle, trim), cfg),
        stft(trim_observation(raw.tailstock, trim), cfg),
    )
