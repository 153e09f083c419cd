"""Splits, cross-validation, feature sweeps, metrics and interpretation coefficients."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateLabelsError, DimensionError
from .pipeline import (
    Pipeline,
    PipelineConfig,
    attach_classifier,
    fit_base,
    fit_pipeline,
    rank_bound,
    specialize,
    train_classifier,
)

log = logging.getLogger(__name__)

SPLIT_TAGS = ("train", "cv", "test")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.80
    folds: int = 5
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if int(self.folds) < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")


def _rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), purpose])))


def _train_counts(counts: np.ndarray, fraction: float) -> np.ndarray:
    """Per-class training counts: floors, then the remainder to the largest fractions."""
    exact = counts * fraction
    base = np.floor(exact).astype(int)
    target = int(np.floor(counts.sum() * fraction + 0.5))
    extra = target - base.sum()
    order = np.lexsort((np.arange(len(counts)), -(exact - base)))
    base[order[:extra]] += 1
    return base


def split(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train and test index arrays."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    rng = _rng(spec.seed, 0)
    if not spec.stratified:
        perm = rng.permutation(n)
        k = int(np.floor(n * spec.train_fraction + 0.5))
        return np.sort(perm[:k]), np.sort(perm[k:])
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < spec.folds]
    if small.size:
        raise DegenerateLabelsError(f"classes {small.tolist()} have fewer than {spec.folds} samples")
    n_train = _train_counts(counts, spec.train_fraction)
    train = []
    test = []
    for c, k in zip(classes, n_train):
        idx = rng.permutation(np.flatnonzero(labels == c))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def fold_assignment(labels, spec: SplitSpec) -> np.ndarray:
    """Fold id per sample; stratified folds deal each class round-robin."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    k = int(spec.folds)
    if n < k:
        raise DegenerateLabelsError(f"{n} samples cannot fill {k} folds")
    rng = _rng(spec.seed, 1)
    fold = np.empty(n, dtype=int)
    if not spec.stratified:
        fold[rng.permutation(n)] = np.arange(n) % k
        return fold
    start = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        # continue dealing where the previous class stopped so fold sizes stay balanced
        fold[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    return fold


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class_f1: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    confusion: np.ndarray  # rows: truth, columns: prediction
    classes: np.ndarray
    split_tag: str

    @property
    def macro_f1(self) -> float:
        return float(self.per_class_f1.mean())

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "split": self.split_tag,
            "accuracy": float(self.accuracy),
            "f1": [float(v) for v in self.per_class_f1],
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
            "confusion": self.confusion.tolist(),
            "classes": [int(c) for c in self.classes],
        }


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def confusion_and_f1(predictions, truths, classes=None, split_tag: str = "test") -> MetricsReport:
    pred = np.asarray(predictions)
    truth = np.asarray(truths)
    if pred.shape != truth.shape:
        raise DimensionError(f"{pred.shape[0]} predictions but {truth.shape[0]} truths")
    if split_tag not in SPLIT_TAGS:
        raise ValueError(f"split_tag must be one of {SPLIT_TAGS}")
    classes = np.unique(np.concatenate([truth, pred])) if classes is None else np.asarray(classes)
    c = classes.shape[0]
    ti = np.searchsorted(classes, truth)
    pi = np.searchsorted(classes, pred)
    for name, v, i in (("truth", truth, ti), ("prediction", pred, pi)):
        bad = (i >= c) | (classes[np.minimum(i, c - 1)] != v)
        if bad.any():
            raise DegenerateLabelsError(f"{name} label {v[bad][0]!r} is outside the class set {classes.tolist()}")
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (ti, pi), 1)
    tp = np.diag(confusion).astype(float)
    precision = _ratio(tp, confusion.sum(axis=0).astype(float))
    recall = _ratio(tp, confusion.sum(axis=1).astype(float))
    f1 = _ratio(2 * precision * recall, precision + recall)
    total = confusion.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    return MetricsReport(accuracy, f1, precision, recall, confusion, classes, split_tag)


def evaluate(model: Pipeline, x, labels, classes=None, split_tag: str = "test") -> MetricsReport:
    classes = model.classes if classes is None else classes
    return confusion_and_f1(model.predict(x), labels, classes, split_tag)


@dataclass(frozen=True)
class CvResult:
    folds: tuple  # MetricsReport per evaluated fold
    skipped: int
    mean_accuracy: float
    pooled: MetricsReport | None  # all held-out predictions together


def _fold_jobs(labels, spec: SplitSpec):
    labels = np.asarray(labels)
    classes = np.unique(labels)
    assign = fold_assignment(labels, spec)
    jobs = []
    skipped = 0
    for f in range(spec.folds):
        fit_idx = np.flatnonzero(assign != f)
        held = np.flatnonzero(assign == f)
        if held.size == 0 or np.unique(labels[fit_idx]).shape[0] != classes.shape[0]:
            skipped += 1
            continue
        jobs.append((fit_idx, held))
    if skipped:
        log.warning("skipped %d degenerate fold(s) with a class missing from the fitting part", skipped)
    return jobs, skipped, classes


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _summarize(per_fold, pairs, classes, skipped) -> CvResult:
    if not per_fold:
        return CvResult((), skipped, float("nan"), None)
    pred = np.concatenate([p for p, _ in pairs])
    truth = np.concatenate([t for _, t in pairs])
    pooled = confusion_and_f1(pred, truth, classes, "cv")
    return CvResult(tuple(per_fold), skipped, float(np.mean([r.accuracy for r in per_fold])), pooled)


def kfold_cv(x, labels, spec: SplitSpec, cfg: PipelineConfig) -> CvResult:
    """Fit subspace and classifier on k-1 folds, score the held-out fold."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    jobs, skipped, classes = _fold_jobs(labels, spec)

    def run(job):
        fit_idx, held = job
        model = fit_pipeline(x[fit_idx], labels[fit_idx], cfg)
        return model.predict(x[held]), labels[held]

    pairs = _map(run, jobs, cfg.threads)
    per_fold = [confusion_and_f1(p, t, classes, "cv") for p, t in pairs]
    return _summarize(per_fold, pairs, classes, skipped)


@dataclass(frozen=True)
class SweepResult:
    method: str
    p_values: np.ndarray
    train_accuracy: np.ndarray
    cv_accuracy: np.ndarray
    test_accuracy: np.ndarray
    optimal_p: int
    train_drops: tuple = field(default=())  # P values where train accuracy fell vs the previous P

    def rows(self):
        for i, p in enumerate(self.p_values):
            yield int(p), float(self.train_accuracy[i]), float(self.cv_accuracy[i]), float(self.test_accuracy[i])


def optimal_p(p_values, cv_accuracy) -> int:
    """Argmax of CV accuracy, lowest P on ties."""
    cv = np.asarray(cv_accuracy, dtype=float)
    return int(np.asarray(p_values)[int(np.nanargmax(cv))])


def _accuracies_over_p(x_fit, y_fit, x_eval_list, y_eval_list, p_values, cfg):
    base = fit_base(x_fit, y_fit, cfg, max(p_values))
    out = np.zeros((len(p_values), len(x_eval_list)))
    for i, p in enumerate(p_values):
        sub = specialize(base, x_fit, y_fit, cfg, p)
        clf = train_classifier(sub.project(x_fit), y_fit, cfg)
        for j, (xe, ye) in enumerate(zip(x_eval_list, y_eval_list)):
            out[i, j] = np.mean(clf.predict(sub.project(xe)) == ye)
    return out


def feature_sweep(x, labels, cfg: PipelineConfig, p_values, spec: SplitSpec) -> SweepResult:
    """Train, CV and test accuracy for every P; each subspace is fitted once at max P and truncated."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    p_values = np.array(sorted({int(p) for p in p_values}))
    if p_values.size == 0 or p_values[0] < 1:
        raise ConfigError("p range must contain positive integers")
    train_idx, test_idx = split(labels, spec)
    xtr, ytr = x[train_idx], labels[train_idx]
    jobs, skipped, classes = _fold_jobs(ytr, spec)
    bound = min(rank_bound(cfg.method, fit.size, classes.size, x.shape[1:]) for fit, _ in jobs)
    if p_values[-1] > bound:
        raise DimensionError(f"P={p_values[-1]} exceeds the {cfg.method} rank bound {bound} of the CV folds")

    def run(job):
        fit_idx, held = job
        return _accuracies_over_p(xtr[fit_idx], ytr[fit_idx], [xtr[held]], [ytr[held]], p_values, cfg)[:, 0]

    fold_acc = np.array(_map(run, jobs, cfg.threads))
    cv = fold_acc.mean(axis=0) if len(jobs) else np.full(p_values.size, np.nan)
    full = _accuracies_over_p(xtr, ytr, [xtr, x[test_idx]], [ytr, labels[test_idx]], p_values, cfg)
    train_acc, test_acc = full[:, 0], full[:, 1]
    drops = tuple(int(p_values[i]) for i in range(1, p_values.size) if train_acc[i] < train_acc[i - 1])
    if drops:
        log.info("training accuracy fell at P=%s", list(drops))
    return SweepResult(cfg.method, p_values, train_acc, cv, test_acc, optimal_p(p_values, cv), drops)


@dataclass(frozen=True)
class ThetaReport:
    per_sample: np.ndarray  # N x P, rows sum to 1
    class_means: np.ndarray  # c x P
    classes: np.ndarray

    def to_dict(self) -> dict:
        return {
            "classes": [int(c) for c in self.classes],
            "mean_theta": [[float(v) for v in row] for row in self.class_means],
        }


def theta_from_features(y) -> np.ndarray:
    """Share of each feature in a sample's projected energy; a zero projection gives 1/P each."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    energy = y**2
    total = energy.sum(axis=1, keepdims=True)
    p = y.shape[1]
    theta = np.full_like(energy, 1.0 / p)
    nz = total[:, 0] > 0
    theta[nz] = energy[nz] / total[nz]
    return theta


def interpretation_theta(model, samples, labels, classes=None) -> ThetaReport:
    """Class-wise mean theta of ``model.project`` (any subspace model or a pipeline)."""
    project = model.features if isinstance(model, Pipeline) else model.project
    y = np.atleast_2d(project(samples))
    labels = np.asarray(labels)
    if y.shape[0] != labels.shape[0]:
        raise DimensionError(f"{y.shape[0]} samples but {labels.shape[0]} labels")
    theta = theta_from_features(y)
    classes = np.unique(labels) if classes is None else np.asarray(classes)
    means = np.stack(
        [theta[labels == c].mean(axis=0) if np.any(labels == c) else np.full(y.shape[1], np.nan) for c in classes]
    )
    return ThetaReport(theta, means, classes)


def export_projections(model, samples, labels, class_names=None) -> str:
    """CSV text with columns ``label, y1..yP``; values carry float32 round-trip precision."""
    project = model.features if isinstance(model, Pipeline) else model.project
    y = np.atleast_2d(project(samples)).astype(np.float32)
    labels = np.asarray(labels)
    if y.shape[0] != labels.shape[0]:
        raise DimensionError(f"{y.shape[0]} samples but {labels.shape[0]} labels")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label"] + [f"y{k + 1}" for k in range(y.shape[1])])
    for lab, row in zip(labels, y):
        name = class_names[int(lab)] if class_names is not None else str(lab)
        writer.writerow([name] + [repr(float(v)) if np.isfinite(v) else str(v) for v in row])
    return buf.getvalue()


def read_projections(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    labels = [r[0] for r in body]
    values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float32).reshape(len(body), len(header) - 1)
    return header, labels, values


@dataclass(frozen=True)
class ExperimentReport:
    method: str
    p: int
    model: Pipeline
    train: MetricsReport
    cv: CvResult
    test: MetricsReport
    theta: ThetaReport
    train_idx: np.ndarray
    test_idx: np.ndarray

    def to_dict(self, class_names=None) -> dict:
        cv = self.cv.pooled.to_dict() if self.cv.pooled is not None else None
        if cv is not None:
            cv["mean_fold_accuracy"] = self.cv.mean_accuracy
            cv["skipped_folds"] = self.cv.skipped
        out = {
            "method": self.method,
            "P": self.p,
            "splits": {"train": self.train.to_dict(), "cv": cv, "test": self.test.to_dict()},
            "confusion": self.test.confusion.tolist(),
            "f1": [float(v) for v in self.test.per_class_f1],
            "theta": self.theta.to_dict(),
        }
        if self.method == "pca_lda":
            out["P_prime"] = int(self.model.subspace.n_features)
        if class_names is not None:
            out["class_names"] = [class_names[int(c)] for c in self.test.classes]
        return out


def run_experiment(x, labels, cfg: PipelineConfig, spec: SplitSpec, cv: bool = True) -> ExperimentReport:
    """Split, cross-validate on the training part, fit on all of it and score the test part."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    train_idx, test_idx = split(labels, spec)
    xtr, ytr = x[train_idx], labels[train_idx]
    cv_result = kfold_cv(xtr, ytr, spec, cfg) if cv else CvResult((), 0, float("nan"), None)
    model = fit_pipeline(xtr, ytr, cfg)
    train_rep = evaluate(model, xtr, ytr, classes, "train")
    test_rep = evaluate(model, x[test_idx], labels[test_idx], classes, "test")
    theta = interpretation_theta(model, x[test_idx], labels[test_idx], classes)
    return ExperimentReport(cfg.method, cfg.p, model, train_rep, cv_result, test_rep, theta, train_idx, test_idx)


__all__ = [
    "CvResult",
    "ExperimentReport",
    "MetricsReport",
    "SplitSpec",
    "SweepResult",
    "ThetaReport",
    "attach_classifier",
    "confusion_and_f1",
    "evaluate",
    "export_projections",
    "feature_sweep",
    "fold_assignment",
    "interpretation_theta",
    "kfold_cv",
    "optimal_p",
    "read_projections",
    "run_experiment",
    "split",
    "theta_from_features",
]
