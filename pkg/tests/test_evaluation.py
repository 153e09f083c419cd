import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghm.errors import ConfigError, DegenerateLabelsError, DimensionError
from ghm.evaluation import (
    SplitSpec,
    confusion_and_f1,
    export_projections,
    feature_sweep,
    fold_assignment,
    interpretation_theta,
    kfold_cv,
    optimal_p,
    read_projections,
    run_experiment,
    split,
    theta_from_features,
)
from ghm.pca import fit_pca
from ghm.pipeline import PipelineConfig, fit_pipeline

LABELS_429 = np.repeat(np.arange(4), [150, 130, 110, 39])


def test_split_sizes_for_default_corpus():
    train, test = split(LABELS_429, SplitSpec(seed=42))
    assert (train.size, test.size) == (343, 86)
    counts = np.bincount(LABELS_429[train], minlength=4)
    np.testing.assert_allclose(counts, 0.8 * np.array([150, 130, 110, 39]), atol=1)


@settings(max_examples=30)
@given(
    st.lists(st.integers(5, 60), min_size=2, max_size=5),
    st.floats(0.1, 0.9),
    st.integers(0, 2**32),
    st.booleans(),
)
def test_split_is_a_deterministic_partition(sizes, frac, seed, stratified):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    spec = SplitSpec(train_fraction=frac, folds=5, seed=seed, stratified=stratified)
    train, test = split(labels, spec)
    assert np.intersect1d(train, test).size == 0
    np.testing.assert_array_equal(np.union1d(train, test), np.arange(labels.size))
    assert train.size == int(np.floor(labels.size * frac + 0.5))
    again = split(labels, spec)
    np.testing.assert_array_equal(train, again[0])
    if stratified:
        got = np.bincount(labels[train], minlength=len(sizes))
        assert np.all(np.abs(got - frac * np.array(sizes)) <= 1)


def test_split_rejects_tiny_class():
    with pytest.raises(DegenerateLabelsError):
        split(np.repeat([0, 1], [10, 3]), SplitSpec(folds=5))


@pytest.mark.parametrize("kw", [dict(train_fraction=1.0), dict(train_fraction=0.0), dict(folds=1)])
def test_split_spec_validation(kw):
    with pytest.raises(ConfigError):
        SplitSpec(**kw)


@given(st.lists(st.integers(5, 40), min_size=2, max_size=4), st.integers(2, 5), st.booleans())
def test_folds_cover_every_sample_once(sizes, k, stratified):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    fold = fold_assignment(labels, SplitSpec(folds=k, stratified=stratified))
    assert fold.shape == labels.shape and set(np.unique(fold)) == set(range(k))
    sizes_per_fold = np.bincount(fold, minlength=k)
    assert sizes_per_fold.max() - sizes_per_fold.min() <= 1
    if stratified:
        for c in range(len(sizes)):
            per = np.bincount(fold[labels == c], minlength=k)
            assert per.max() - per.min() <= 1


def test_f1_hand_computed_toy_table():
    truth = [0, 0, 1, 1, 2, 2]
    pred = [0, 1, 1, 1, 2, 0]
    r = confusion_and_f1(pred, truth, [0, 1, 2])
    np.testing.assert_array_equal(r.confusion, [[1, 1, 0], [0, 2, 0], [1, 0, 1]])
    np.testing.assert_allclose(r.precision, [1 / 2, 2 / 3, 1.0])
    np.testing.assert_allclose(r.recall, [1 / 2, 1.0, 1 / 2])
    np.testing.assert_allclose(r.per_class_f1, [0.5, 0.8, 2 / 3])
    assert r.accuracy == pytest.approx(4 / 6)


def test_all_correct_gives_identity_pattern():
    y = [0, 1, 2, 3, 3]
    r = confusion_and_f1(y, y, [0, 1, 2, 3])
    np.testing.assert_array_equal(r.confusion, np.diag([1, 1, 1, 2]))
    np.testing.assert_array_equal(r.per_class_f1, np.ones(4))


def test_absent_class_gets_zero_f1():
    r = confusion_and_f1([0, 0], [0, 0], [0, 1])
    np.testing.assert_array_equal(r.per_class_f1, [1.0, 0.0])


def test_two_error_pattern_on_86_samples():
    truth = np.repeat(np.arange(4), [30, 26, 22, 8])
    pred = truth.copy()
    pred[-1] = 1  # one NOK3 read as NOK1
    pred[30] = 0  # one NOK1 read as OK
    r = confusion_and_f1(pred, truth, np.arange(4))
    assert r.confusion[3, 1] == 1 and r.confusion[1, 0] == 1
    assert r.accuracy == pytest.approx(84 / 86)
    np.testing.assert_array_equal(r.support, [30, 26, 22, 8])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_metric_invariants(pairs):
    truth, pred = np.array(pairs).T
    r = confusion_and_f1(pred, truth, np.arange(4))
    np.testing.assert_array_equal(r.confusion.sum(axis=1), np.bincount(truth, minlength=4))
    assert r.accuracy == pytest.approx(np.trace(r.confusion) / len(pairs))
    assert 0.0 <= r.accuracy <= 1.0
    assert r.macro_f1 <= r.per_class_f1.max() + 1e-15


def test_metric_errors():
    with pytest.raises(DimensionError):
        confusion_and_f1([0, 1], [0])
    with pytest.raises(DegenerateLabelsError):
        confusion_and_f1([0, 5], [0, 1], [0, 1])


def test_theta_axis_aligned_and_zero():
    np.testing.assert_array_equal(theta_from_features([[3.0, 0.0, 0.0]]), [[1.0, 0.0, 0.0]])
    np.testing.assert_allclose(theta_from_features([[0.0, 0.0, 0.0, 0.0]]), [[0.25] * 4])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=10))
def test_theta_rows_sum_to_one(y):
    theta = theta_from_features([y])
    assert abs(theta.sum() - 1.0) <= 1e-10
    assert np.all(theta >= 0) and np.all(theta <= 1)


def test_theta_on_planted_patterns():
    rng = np.random.default_rng(0)
    d = 20
    patterns = np.linalg.qr(rng.standard_normal((d, 3)))[0].T
    amps = [6.0, 4.0, 2.0]
    labels = np.repeat(np.arange(3), 40)
    sign = rng.choice([-1.0, 1.0], size=labels.size)
    x = 0.1 * rng.standard_normal((labels.size, d))
    x += (sign * np.take(amps, labels))[:, None] * patterns[labels]
    model = fit_pca(x, 3)
    report = interpretation_theta(model, x, labels)
    for k in range(3):
        planted_feature = int(np.argmax(np.abs(model.components.T @ patterns[k])))
        assert int(np.argmax(report.class_means[k])) == planted_feature
        assert np.argmax(report.class_means[:, planted_feature]) == k
    np.testing.assert_allclose(report.per_sample.sum(axis=1), 1.0, atol=1e-10)


def test_projection_export_round_trip():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((12, 6))
    model = fit_pca(x, 3)
    labels = np.arange(12) % 4
    text = export_projections(model, x, labels, ("OK", "NOK1", "NOK2", "NOK3"))
    header, names, values = read_projections(text)
    assert header == ["label", "y1", "y2", "y3"]
    assert len(names) == 12 and names[:4] == ["OK", "NOK1", "NOK2", "NOK3"]
    np.testing.assert_array_equal(values, model.project(x).astype(np.float32))


def test_cv_on_separable_corpus_is_perfect(small_corpus):
    x, y = small_corpus
    cv = kfold_cv(x, y, SplitSpec(seed=3), PipelineConfig(method="pca", p=3))
    assert cv.mean_accuracy == 1.0 and cv.skipped == 0
    assert cv.pooled.confusion.sum() == y.size


def test_degenerate_folds_are_skipped_with_count(caplog):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((13, 4, 5))
    y = np.array([0] * 6 + [1] * 6 + [2])
    spec = SplitSpec(folds=3, stratified=False, seed=0)
    cv = kfold_cv(x, y, spec, PipelineConfig(method="pca", p=2))
    assert cv.skipped == 1 and len(cv.folds) == 2
    assert "skipped 1 degenerate fold" in caplog.text


def test_sweep_is_deterministic_and_picks_cv_argmax(small_corpus):
    x, y = small_corpus
    cfg = PipelineConfig(method="rumlda")
    spec = SplitSpec(seed=5)
    a = feature_sweep(x, y, cfg, range(1, 4), spec)
    b = feature_sweep(x, y, cfg, [3, 2, 1], spec)
    np.testing.assert_array_equal(a.cv_accuracy, b.cv_accuracy)
    np.testing.assert_array_equal(a.test_accuracy, b.test_accuracy)
    assert a.optimal_p == optimal_p(a.p_values, a.cv_accuracy)
    assert len(list(a.rows())) == 3


def test_sweep_point_matches_direct_experiment(small_corpus):
    x, y = small_corpus
    spec = SplitSpec(seed=6)
    for method in ("pca", "pca_lda", "rumlda"):
        sweep = feature_sweep(x, y, PipelineConfig(method=method), [2, 4], spec)
        direct = run_experiment(x, y, PipelineConfig(method=method, p=2), spec)
        assert sweep.test_accuracy[0] == direct.test.accuracy
        assert sweep.train_accuracy[0] == direct.train.accuracy
        assert sweep.cv_accuracy[0] == direct.cv.mean_accuracy


def test_optimal_p_prefers_lowest_on_ties():
    assert optimal_p([1, 2, 3, 4], [0.9, 1.0, 1.0, 0.95]) == 2


def test_sweep_rejects_p_beyond_rank_bound(small_corpus):
    x, y = small_corpus
    with pytest.raises(DimensionError):
        feature_sweep(x, y, PipelineConfig(method="rumlda"), [1, 60], SplitSpec())


def _model_hash(model) -> str:
    h = hashlib.sha256()
    h.update(model.subspace.project(np.eye(1, 50 * 64).reshape(1, 50, 64)).tobytes())
    for learner in model.classifier.learners:
        h.update(learner.support_vectors.tobytes() + learner.weights.tobytes())
    return h.hexdigest()


def test_test_partition_never_reaches_the_fit(small_corpus):
    x, y = small_corpus
    spec = SplitSpec(seed=7)
    cfg = PipelineConfig(method="pca_lda", p=4)
    base = run_experiment(x, y, cfg, spec, cv=False)
    x2 = x.copy()
    test = base.test_idx
    x2[test] = x[np.random.default_rng(0).permutation(test)]
    x2[test] += 5.0
    other = run_experiment(x2, y, cfg, spec, cv=False)
    assert _model_hash(base.model) == _model_hash(other.model)


def test_report_json_schema(small_corpus):
    x, y = small_corpus
    rep = run_experiment(x, y, PipelineConfig(method="pca_lda", p=4), SplitSpec(seed=8))
    d = rep.to_dict(("OK", "NOK1", "NOK2", "NOK3"))
    assert {"method", "P", "splits", "confusion", "f1", "theta"} <= set(d)
    assert set(d["splits"]) == {"train", "cv", "test"}
    assert d["P_prime"] == 3
    assert d["splits"]["test"]["accuracy"] == pytest.approx(np.trace(d["confusion"]) / np.sum(d["confusion"]))
