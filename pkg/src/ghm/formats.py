"""Binary signal/dataset containers, model JSON, PGM images and atomic writes.

Raw observation ("GHRW", little-endian)::

    b"GHRW" | u32 channels (=2) | u32 samples | f64 sample rate | f32[samples] per channel

Dataset ("GHDS", little-endian)::

    b"GHDS" | u32 N | u32 mode tag | u32 w | u32 b | u32 channels
    then per sample: u8 class label | f32[w * b * channels] (C order)

Model files are JSON; every float array is stored as ``float.hex`` strings so a
load reproduces the saved doubles exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CorruptDataError, MissingInputError
from .lda import FisherModel
from .pca import PcaModel
from .pipeline import Pipeline, PipelineConfig
from .preprocess import GRAY_MAX, Mode
from .spectrogram import RawObservation
from .svm import BinarySvm, EcocClassifier
from .umlda import Emp, UmldaModel

RAW_MAGIC = b"GHRW"
DATASET_MAGIC = b"GHDS"
MODEL_FORMAT = "ghm-model"
MODEL_VERSION = 1

_RAW_HEADER = struct.Struct("<4sIId")
_DS_HEADER = struct.Struct("<4sIIIII")


def atomic_write(path, data) -> Path:
    """Write ``data`` (bytes or str) via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_bytes(path) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise MissingInputError(f"input file not found: {path}") from None
    except IsADirectoryError:
        raise MissingInputError(f"expected a file, found a directory: {path}") from None


# ---------------------------------------------------------------- raw signals


def encode_raw(obs: RawObservation) -> bytes:
    n = len(obs)
    head = _RAW_HEADER.pack(RAW_MAGIC, 2, n, float(obs.sample_rate))
    return head + obs.spindle.astype("<f4").tobytes() + obs.tailstock.astype("<f4").tobytes()


def decode_raw(buf: bytes, source: str = "<bytes>") -> RawObservation:
    if len(buf) < _RAW_HEADER.size:
        raise CorruptDataError(f"{source}: truncated header ({len(buf)} bytes)")
    magic, channels, n, rate = _RAW_HEADER.unpack_from(buf)
    if magic != RAW_MAGIC:
        raise CorruptDataError(f"{source}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
    if channels != 2:
        raise CorruptDataError(f"{source}: expected 2 channels, header says {channels}")
    expected = _RAW_HEADER.size + 2 * 4 * n
    if len(buf) != expected:
        raise CorruptDataError(f"{source}: expected {expected} bytes for {n} samples, got {len(buf)}")
    if not (np.isfinite(rate) and rate > 0):
        raise CorruptDataError(f"{source}: invalid sample rate {rate}")
    data = np.frombuffer(buf, dtype="<f4", offset=_RAW_HEADER.size).astype(float)
    if not np.all(np.isfinite(data)):
        raise CorruptDataError(f"{source}: non-finite samples")
    return RawObservation(data[:n], data[n:], rate, meta={"source": source})


def write_raw(path, obs: RawObservation) -> Path:
    return atomic_write(path, encode_raw(obs))


def read_raw(path) -> RawObservation:
    return decode_raw(read_bytes(path), str(path))


# ---------------------------------------------------------------- datasets


def _layout(shape, mode: Mode) -> tuple[int, int, int]:
    if mode is Mode.PAIR:
        if len(shape) != 3 or shape[2] != 2:
            raise CorruptDataError(f"pair samples must be (w, b, 2), got {shape}")
        return shape[0], shape[1], 2
    if len(shape) != 2:
        raise CorruptDataError(f"{mode.label} samples must be stored as (w, b) maps, got {shape}")
    return shape[0], shape[1], 1


def encode_dataset(data, labels, mode) -> bytes:
    """``data`` holds (w, b) maps, or (w, b, 2) tensors for pair mode; vector mode stores maps too."""
    mode = Mode.parse(mode)
    data = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    if data.shape[0] != labels.shape[0]:
        raise CorruptDataError(f"{data.shape[0]} samples but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise CorruptDataError("class labels must fit in one byte")
    w, b, ch = _layout(data.shape[1:], mode)
    out = bytearray(_DS_HEADER.pack(DATASET_MAGIC, data.shape[0], int(mode), w, b, ch))
    for lab, sample in zip(labels, data):
        out += struct.pack("<B", int(lab))
        out += sample.astype("<f4").tobytes()
    return bytes(out)


def decode_dataset(buf: bytes, source: str = "<bytes>"):
    """Returns (data, labels, mode, dims); data is (N, w, b) or (N, w, b, 2) float64."""
    if len(buf) < _DS_HEADER.size:
        raise CorruptDataError(f"{source}: truncated header ({len(buf)} bytes)")
    magic, n, tag, w, b, ch = _DS_HEADER.unpack_from(buf)
    if magic != DATASET_MAGIC:
        raise CorruptDataError(f"{source}: bad magic {magic!r}, expected {DATASET_MAGIC!r}")
    try:
        mode = Mode(tag)
    except ValueError:
        raise CorruptDataError(f"{source}: unknown mode tag {tag}") from None
    if ch != (2 if mode is Mode.PAIR else 1) or w == 0 or b == 0:
        raise CorruptDataError(f"{source}: dims ({w}, {b}, {ch}) inconsistent with mode {mode.label}")
    payload = w * b * ch
    rec = np.dtype([("label", "u1"), ("x", "<f4", (payload,))])
    expected = _DS_HEADER.size + n * rec.itemsize
    if len(buf) != expected:
        raise CorruptDataError(f"{source}: expected {expected} bytes for {n} samples, got {len(buf)}")
    recs = np.frombuffer(buf, dtype=rec, count=n, offset=_DS_HEADER.size)
    data = recs["x"].astype(float)
    if not np.all(np.isfinite(data)):
        raise CorruptDataError(f"{source}: non-finite values")
    shape = (n, w, b, 2) if mode is Mode.PAIR else (n, w, b)
    return data.reshape(shape), recs["label"].astype(np.int64), mode, (w, b, ch)


def write_dataset(path, data, labels, mode) -> Path:
    return atomic_write(path, encode_dataset(data, labels, mode))


def read_dataset(path):
    return decode_dataset(read_bytes(path), str(path))


# ---------------------------------------------------------------- PGM


def quantize(m) -> np.ndarray:
    """[0, 255] values to bytes by round-half-up."""
    m = np.asarray(m, dtype=float)
    return np.clip(np.floor(m + 0.5), 0, GRAY_MAX).astype(np.uint8)


def encode_pgm(m, transpose: bool = False) -> bytes:
    """Binary P5 image; rows of ``m`` become image rows (columns when ``transpose``)."""
    q = quantize(m)
    if q.ndim != 2:
        raise ValueError(f"PGM needs a 2-D map, got shape {q.shape}")
    if transpose:
        q = q.T
    height, width = q.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + np.ascontiguousarray(q).tobytes()


def decode_pgm(buf: bytes) -> np.ndarray:
    parts = buf.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise CorruptDataError("not a binary P5 PGM")
    width, height = (int(v) for v in parts[1].split())
    if int(parts[2]) != 255 or len(parts[3]) != width * height:
        raise CorruptDataError("PGM payload does not match its header")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)


def write_pgm(path, m, transpose: bool = False) -> Path:
    return atomic_write(path, encode_pgm(m, transpose))


# ---------------------------------------------------------------- model JSON


def _arr(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "hex": [float(v).hex() for v in a.reshape(-1)]}


def _unarr(d) -> np.ndarray:
    try:
        flat = np.array([float.fromhex(v) for v in d["hex"]], dtype=float)
        return flat.reshape(d["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDataError(f"malformed array payload: {exc}") from None


def _hex(v: float) -> str:
    return float(v).hex()


def _pca_payload(m: PcaModel) -> dict:
    return {
        "mean": _arr(m.mean),
        "components": _arr(m.components),
        "eigenvalues": _arr(m.eigenvalues),
        "map_dims": list(m.map_dims),
    }


def _pca_load(d) -> PcaModel:
    return PcaModel(_unarr(d["mean"]), _unarr(d["components"]), _unarr(d["eigenvalues"]), tuple(d["map_dims"]))


def subspace_payload(m) -> tuple[str, dict]:
    if isinstance(m, PcaModel):
        return "pca", _pca_payload(m)
    if isinstance(m, FisherModel):
        return "pca_lda", {
            "pca": _pca_payload(m.pca),
            "lda_components": _arr(m.lda_components),
            "eigenvalues": _arr(m.eigenvalues),
            "combined": _arr(m.combined),
            "class_means": _arr(m.class_means),
            "classes": [int(c) for c in m.classes],
            "ridged": bool(m.ridged),
        }
    if isinstance(m, UmldaModel):
        return "rumlda", {
            "emps": [[_arr(v) for v in e.vectors] for e in m.emps],
            "mean": _arr(m.mean),
            "gamma": _hex(m.gamma),
            "deflation": _arr(m.deflation),
            "training_features": _arr(m.training_features),
            "classes": [int(c) for c in m.classes],
            "reg_scale": _hex(m.reg_scale),
            "fisher_history": [_arr(h) for h in m.fisher_history],
            "converged": [bool(c) for c in m.converged],
        }
    raise TypeError(f"unsupported subspace model {type(m).__name__}")


def subspace_load(method: str, d):
    if method == "pca":
        return _pca_load(d)
    if method == "pca_lda":
        return FisherModel(
            pca=_pca_load(d["pca"]),
            lda_components=_unarr(d["lda_components"]),
            eigenvalues=_unarr(d["eigenvalues"]),
            combined=_unarr(d["combined"]),
            class_means=_unarr(d["class_means"]),
            classes=np.array(d["classes"], dtype=np.int64),
            ridged=bool(d["ridged"]),
        )
    if method == "rumlda":
        return UmldaModel(
            emps=tuple(Emp(tuple(_unarr(v) for v in e)) for e in d["emps"]),
            mean=_unarr(d["mean"]),
            gamma=float.fromhex(d["gamma"]),
            deflation=_unarr(d["deflation"]),
            training_features=_unarr(d["training_features"]),
            classes=np.array(d["classes"], dtype=np.int64),
            reg_scale=float.fromhex(d["reg_scale"]),
            fisher_history=tuple(_unarr(h) for h in d["fisher_history"]),
            converged=tuple(bool(c) for c in d["converged"]),
        )
    raise CorruptDataError(f"unknown method tag {method!r}")


def _svm_payload(s: BinarySvm) -> dict:
    return {
        "support_vectors": _arr(s.support_vectors),
        "weights": _arr(s.weights),
        "bias": _hex(s.bias),
        "scale": _hex(s.scale),
        "C": _hex(s.box_c),
        "iterations": int(s.iterations),
    }


def _svm_load(d) -> BinarySvm:
    sv = _unarr(d["support_vectors"])
    return BinarySvm(
        support_vectors=sv,
        weights=_unarr(d["weights"]),
        bias=float.fromhex(d["bias"]),
        scale=float.fromhex(d["scale"]),
        box_c=float.fromhex(d["C"]),
        iterations=int(d["iterations"]),
    )


def model_to_dict(model: Pipeline, provenance: dict | None = None, input_info: dict | None = None) -> dict:
    method, payload = subspace_payload(model.subspace)
    clf = model.classifier
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_VERSION,
        "method": method,
        "config": model.config.to_dict(),
        "input": input_info or {},
        "subspace": payload,
        "classifier": {
            "coding": np.asarray(clf.coding).astype(int).tolist(),
            "classes": [int(c) for c in clf.classes],
            "learners": [_svm_payload(s) for s in clf.learners],
        },
        "provenance": provenance or {},
    }


def model_from_dict(d) -> tuple[Pipeline, dict]:
    """Returns the pipeline and the ``input`` block describing the expected samples."""
    try:
        if d.get("format") != MODEL_FORMAT:
            raise CorruptDataError(f"not a model file (format={d.get('format')!r})")
        if d.get("format_version") != MODEL_VERSION:
            raise CorruptDataError(f"unsupported model format_version {d.get('format_version')!r}")
        cfg = PipelineConfig(**d["config"])
        sub = subspace_load(d["method"], d["subspace"])
        c = d["classifier"]
        clf = EcocClassifier(
            coding=np.array(c["coding"], dtype=int),
            learners=tuple(_svm_load(s) for s in c["learners"]),
            classes=np.array(c["classes"], dtype=np.int64),
        )
        return Pipeline(cfg, sub, clf), d.get("input", {})
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorruptDataError(f"malformed model file: missing or invalid field {exc}") from None


def dumps_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=1, separators=(",", ": "), allow_nan=True) + "\n"


def save_model(path, model: Pipeline, provenance: dict | None = None, input_info: dict | None = None) -> Path:
    return atomic_write(path, dumps_json(model_to_dict(model, provenance, input_info)))


def load_json(path):
    text = read_bytes(path).decode("utf-8", errors="replace")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptDataError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_model(path) -> tuple[Pipeline, dict]:
    return model_from_dict(load_json(path))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
