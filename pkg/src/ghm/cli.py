"""Command-line entry point: ``ghm <subcommand> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 missing input, 4 corrupt data,
5 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, CorruptDataError, DimensionError, GhmError, MissingInputError, NumericError
from .evaluation import (
    SplitSpec,
    evaluate,
    export_projections,
    feature_sweep,
    interpretation_theta,
    kfold_cv,
    split,
    theta_from_features,
)
from .formats import (
    atomic_write,
    dumps_json,
    load_json,
    load_model,
    read_dataset,
    read_raw,
    save_model,
    sha256_hex,
    encode_raw,
    write_dataset,
    write_pgm,
)
from .lda import discriminant_map
from .pca import eigen_map
from .pipeline import fit_pipeline, rank_bound
from .preprocess import Mode, assemble
from .spectrogram import StftConfig
from .svm import hinge_losses
from .synth import CLASSES, gen_observation, signal_checksum
from .umlda import emp_map

log = logging.getLogger("ghm")

MANIFEST = "manifest.json"
DATASET = "dataset.ghds"
MODEL = "model.json"


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("GHM_THREADS")
    if env is None or env == "":
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"GHM_THREADS must be a positive integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"GHM_THREADS must be a positive integer, got {env!r}")
    return n


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg.with_threads(_threads(args))


def _out(args, default: str = ".") -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _input_info(cfg: RunConfig) -> dict:
    return {
        "stft": dataclasses.asdict(cfg.stft),
        "mode": cfg.mode,
        "trim": cfg.trim,
        "class_names": list(CLASSES),
    }


def _provenance(cfg: RunConfig) -> dict:
    text = dumps_json(cfg.to_dict())
    return {"seed": cfg.split.seed, "config_sha256": sha256_hex(text.encode()), "tool_version": __version__}


def _write_json(path: Path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def _names(labels) -> list:
    return [CLASSES[int(v)] if 0 <= int(v) < len(CLASSES) else str(int(v)) for v in labels]


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    cfg = _config(args)
    out = _out(args)
    raw_dir = out / "raw"
    entries = []
    for cls, count in enumerate(cfg.synth.counts):
        for i in range(count):
            obs = gen_observation(cls, cfg.synth, i)
            name = f"{CLASSES[cls]}_{i:04d}.ghrw"
            blob = encode_raw(obs)
            atomic_write(raw_dir / name, blob)
            entries.append(
                {
                    "file": f"raw/{name}",
                    "label": cls,
                    "class": CLASSES[cls],
                    "index": i,
                    "sha256": sha256_hex(blob),
                    "signal_sha256": signal_checksum(obs),
                }
            )
    manifest = {
        "generator": "ghm.synth",
        "synthetic": True,
        "seed": cfg.synth.seed,
        "config": cfg.synth.to_dict(),
        "counts": dict(zip(CLASSES, cfg.synth.counts)),
        "total": len(entries),
        "observations": entries,
    }
    _write_json(out / MANIFEST, manifest)
    print(json.dumps({"observations": len(entries), "manifest": str(out / MANIFEST)}))
    return 0


# ---------------------------------------------------------------- featurize


def _read_manifest(root: Path):
    path = root / MANIFEST if root.is_dir() else root
    m = load_json(path)
    try:
        return path.parent, [(e["file"], int(e["label"])) for e in m["observations"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDataError(f"{path}: malformed manifest ({exc})") from None


def cmd_featurize(args) -> int:
    cfg = _config(args)
    base, entries = _read_manifest(Path(args.raw))
    mode = cfg.input_mode
    layout = Mode.PAIR if mode is Mode.PAIR else Mode.MERGED
    samples = []
    labels = []
    for rel, lab in entries:
        obs = read_raw(base / rel)
        samples.append(assemble(obs, cfg.stft, layout, cfg.trim))
        labels.append(lab)
    out = _out(args)
    path = write_dataset(out / DATASET, np.stack(samples), np.array(labels), mode)
    print(json.dumps({"samples": len(samples), "mode": mode.label, "dataset": str(path)}))
    return 0


# ---------------------------------------------------------------- train / eval


def _load_learner_data(path):
    # vector datasets stay map-shaped: PCA flattens internally and keeps the map dims for images
    data, labels, mode, _ = read_dataset(path)
    return data, labels, mode


def _check_dataset_mode(cfg: RunConfig, mode: Mode) -> None:
    if cfg.pipeline.method == "rumlda" and mode is Mode.VECTOR:
        raise ConfigError("rumlda needs a merged or pair dataset, got vector mode")


def cmd_train(args) -> int:
    cfg = _config(args)
    x, labels, mode = _load_learner_data(args.dataset)
    _check_dataset_mode(cfg, mode)
    train_idx, _ = split(labels, cfg.split)
    xtr, ytr = x[train_idx], labels[train_idx]
    bound = rank_bound(cfg.pipeline.method, xtr.shape[0], np.unique(ytr).size, xtr.shape[1:])
    if cfg.pipeline.p > bound:
        raise ConfigError(f"pipeline.p={cfg.pipeline.p} exceeds the {cfg.pipeline.method} rank bound {bound}")
    model = fit_pipeline(xtr, ytr, cfg.pipeline)
    report = evaluate(model, xtr, ytr, np.unique(labels), "train")
    info = _input_info(cfg)
    info["mode"] = mode.label
    info["split"] = dataclasses.asdict(cfg.split)
    out = _out(args)
    save_model(out / MODEL, model, _provenance(cfg), info)
    metrics = {"method": cfg.pipeline.method, "P": cfg.pipeline.p, "splits": {"train": report.to_dict()}}
    _write_json(out / "train_metrics.json", metrics)
    print(json.dumps({"model": str(out / MODEL), "train_accuracy": report.accuracy}))
    return 0


def cmd_eval(args) -> int:
    _threads(args)
    model, info = load_model(args.model)
    x, labels, mode = _load_learner_data(args.dataset)
    if info.get("mode") and info["mode"] != mode.label:
        raise CorruptDataError(f"model expects {info['mode']} samples, dataset holds {mode.label}")
    spec = SplitSpec(**info["split"]) if args.config is None and "split" in info else _config(args).split
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    classes = np.unique(labels)
    train_idx, test_idx = split(labels, spec)
    splits = {
        "train": evaluate(model, x[train_idx], labels[train_idx], classes, "train").to_dict(),
        "test": evaluate(model, x[test_idx], labels[test_idx], classes, "test").to_dict(),
        "cv": None,
    }
    if not args.skip_cv:
        pcfg = dataclasses.replace(model.config, threads=_threads(args))
        cv = kfold_cv(x[train_idx], labels[train_idx], spec, pcfg)
        if cv.pooled is not None:
            splits["cv"] = cv.pooled.to_dict() | {"mean_fold_accuracy": cv.mean_accuracy, "skipped_folds": cv.skipped}
    theta = interpretation_theta(model, x[test_idx], labels[test_idx], classes)
    report = {
        "method": model.config.method,
        "P": model.config.p,
        "P_features": int(model.subspace.n_features),
        "splits": splits,
        "confusion": splits["test"]["confusion"],
        "f1": splits["test"]["f1"],
        "theta": theta.to_dict(),
        "class_names": _names(classes),
    }
    out = _out(args)
    _write_json(out / "metrics.json", report)
    if args.projections:
        atomic_write(out / "projections.csv", export_projections(model, x[test_idx], labels[test_idx], CLASSES))
    print(json.dumps({"metrics": str(out / "metrics.json"), "test_accuracy": splits["test"]["accuracy"]}))
    return 0


# ---------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    cfg = _config(args)
    pcfg = cfg.pipeline if args.method is None else dataclasses.replace(cfg.pipeline, method=args.method)
    x, labels, mode = _load_learner_data(args.dataset)
    if pcfg.method == "rumlda" and mode is Mode.VECTOR:
        raise ConfigError("rumlda needs a merged or pair dataset, got vector mode")
    p_min = args.p_min if args.p_min is not None else cfg.sweep.p_min
    p_max = args.p_max if args.p_max is not None else cfg.sweep.p_max
    if not 1 <= p_min <= p_max:
        raise ConfigError(f"sweep range must satisfy 1 <= p_min <= p_max, got {p_min}..{p_max}")
    try:
        result = feature_sweep(x, labels, pcfg, range(p_min, p_max + 1), cfg.split)
    except DimensionError as exc:
        raise ConfigError(str(exc)) from None
    lines = ["P,train_accuracy,cv_accuracy,test_accuracy"]
    lines += [f"{p},{tr!r},{cv!r},{te!r}" for p, tr, cv, te in result.rows()]
    out = _out(args)
    atomic_write(out / f"curves_{pcfg.method}.csv", "\n".join(lines) + "\n")
    print(json.dumps({"method": pcfg.method, "optimal_p": result.optimal_p, "train_drops": list(result.train_drops)}))
    return 0


# ---------------------------------------------------------------- eigenmaps


def _basis_maps(model) -> list:
    sub = model.subspace
    method = model.config.method
    k = sub.n_features
    if method == "pca":
        maps = [eigen_map(sub, p) for p in range(1, k + 1)]
    elif method == "pca_lda":
        maps = [discriminant_map(sub, p) for p in range(1, k + 1)]
    else:
        return [emp_map(sub, p) for p in range(1, k + 1)]
    # pair-mode vectors: channels side by side
    return [np.concatenate([m[..., c] for c in range(m.shape[-1])], axis=1) if m.ndim == 3 else m for m in maps]


def cmd_eigenmaps(args) -> int:
    cfg = _config(args)
    model, _ = load_model(args.model)
    out = _out(args)
    maps = _basis_maps(model)
    if any(m.ndim != 2 for m in maps):
        raise CorruptDataError("model components do not reshape to 2-D maps")
    files = []
    for p, m in enumerate(maps, start=1):
        files.append(str(write_pgm(out / f"{model.config.method}_{p:02d}.pgm", m, cfg.images.transpose)))
    print(json.dumps({"images": len(files), "out": str(out)}))
    return 0


# ---------------------------------------------------------------- predict


def cmd_predict(args) -> int:
    model, info = load_model(args.model)
    obs = read_raw(args.observation)
    stft_cfg = StftConfig(**info.get("stft", {}))
    mode = Mode.parse(info.get("mode", "merged"))
    trim = float(info.get("trim", 0.4))
    if len(obs) - int(np.floor(trim * len(obs))) < stft_cfg.min_length():
        raise CorruptDataError(f"observation has {len(obs)} samples, too short for the model's STFT layout")
    sample = assemble(obs, stft_cfg, mode, trim)
    y = model.features(sample)
    scores = model.classifier.scores(y)
    losses = hinge_losses(model.classifier.coding, scores)[0]
    label = int(model.classifier.predict(y))
    names = info.get("class_names", list(CLASSES))
    result = {
        "label": names[label] if 0 <= label < len(names) else str(label),
        "class": label,
        "theta": [float(v) for v in theta_from_features(y)[0]],
        "scores": [float(v) for v in scores],
        "losses": [float(v) for v in losses],
    }
    print(json.dumps(result))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="overrides the generator and split seeds")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (fallback: GHM_THREADS, then 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ghm", description="Gear-quality classification from honing vibration")
    parser.add_argument("--version", action="version", version=f"ghm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic raw corpus")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("featurize", parents=[common], help="raw corpus -> GHDS dataset")
    p.add_argument("raw", help="directory holding manifest.json (or the manifest itself)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="fit subspace + ECOC-SVM on the training split")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="metrics JSON for a saved model")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--skip-cv", action="store_true", help="do not rerun cross-validation")
    p.add_argument("--projections", action="store_true", help="also write test-set projections CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="accuracy curves over the feature count")
    p.add_argument("dataset")
    p.add_argument("--method", choices=["pca", "pca_lda", "rumlda"])
    p.add_argument("--p-min", type=int)
    p.add_argument("--p-max", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eigenmaps", parents=[common], help="write basis maps as PGM images")
    p.add_argument("model")
    p.set_defaults(func=cmd_eigenmaps)

    p = sub.add_parser("predict", parents=[common], help="classify one GHRW observation")
    p.add_argument("model")
    p.add_argument("observation")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        return args.func(args)
    except GhmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericError.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MissingInputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
