"""Grayscale normalisation, Hadamard fusion and learner-input assembly."""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .errors import ConfigError, DimensionError
from .spectrogram import DEFAULT_TRIM, RawObservation, StftConfig, observation_spectrograms

GRAY_MAX = 255.0


class Mode(IntEnum):
    """Learner input layout; the integer value is the dataset-file mode tag."""

    VECTOR = 0
    MERGED = 1
    PAIR = 2

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                pass
        else:
            try:
                return cls(int(value))
            except ValueError:
                pass
        raise ConfigError(f"unknown input mode {value!r}; expected vector, merged or pair")

    @property
    def label(self) -> str:
        return self.name.lower()


def normalize_gray(s) -> np.ndarray:
    """Min-max map onto [0, 255]; a constant input maps to zeros."""
    s = np.asarray(s, dtype=float)
    lo = s.min()
    hi = s.max()
    if hi - lo <= 0.0:
        return np.zeros_like(s)
    out = ((s - lo) / (hi - lo)) * GRAY_MAX
    # guard the upper end against rounding just above 255
    return np.clip(out, 0.0, GRAY_MAX)


def merge_hadamard(sp, tl) -> np.ndarray:
    """Elementwise product of two normalised spectrograms, rescaled to [0, 255]."""
    sp = np.asarray(sp, dtype=float)
    tl = np.asarray(tl, dtype=float)
    if sp.shape != tl.shape:
        raise DimensionError(f"spectrogram shapes differ: {sp.shape} vs {tl.shape}")
    return normalize_gray(sp * tl)


def flatten(m) -> np.ndarray:
    """Frame-major (row-major) vector of a map."""
    return np.asarray(m, dtype=float).reshape(-1)


def unflatten(v, dims) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size != int(np.prod(dims)):
        raise DimensionError(f"vector of length {v.size} cannot reshape to {tuple(dims)}")
    return v.reshape(tuple(dims))


def pair_tensor(sp_norm, tl_norm) -> np.ndarray:
    """(w, b, 2) stack: channel 0 spindle, channel 1 tailstock."""
    return np.stack([np.asarray(sp_norm, float), np.asarray(tl_norm, float)], axis=-1)


def assemble(
    raw: RawObservation,
    cfg: StftConfig | None = None,
    mode="merged",
    trim: float = DEFAULT_TRIM,
) -> np.ndarray:
    """Turn one raw two-channel observation into a learner input.

    ``vector`` gives the flattened merged map, ``merged`` the (w, b) merged
    map and ``pair`` the (w, b, 2) tensor of the two normalised spectrograms.
    """
    mode = Mode.parse(mode)
    sp, tl = observation_spectrograms(raw, cfg, trim)
    sp = normalize_gray(sp)
    tl = normalize_gray(tl)
    if mode is Mode.PAIR:
        return pair_tensor(sp, tl)
    merged = merge_hadamard(sp, tl)
    if mode is Mode.VECTOR:
        return flatten(merged)
    return merged


def assemble_many(raws, cfg=None, mode="merged", trim: float = DEFAULT_TRIM) -> np.ndarray:
    return np.stack([assemble(r, cfg, mode, trim) for r in raws])
