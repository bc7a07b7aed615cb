import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fatmargin import evaluation
from fatmargin.data_io import bundled_dataset_path, load_csv
from fatmargin.dataset import Dataset
from fatmargin.errors import ConfigurationError
from fatmargin.evaluation import (CVConfig, cross_validate, grid_search, stratified_kfold,
                                  stratified_split)


def toy(seed=0, M=40):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(M) % 2 == 0, 1, -1)
    X = rng.normal(size=(M, 2)) * 0.5 + np.where(y == 1, 3.0, -3.0)[:, None]
    return Dataset(X, y, name="toy")


@pytest.fixture(scope="module")
def haberman():
    return load_csv(bundled_dataset_path("haberman"))


def test_one_sample_per_class_per_fold():
    y = np.array([1] * 5 + [-1] * 5)
    folds = stratified_kfold(y, 5, seed=3)
    for f in folds:
        assert sorted(y[f].tolist()) == [-1, 1]


def test_folds_deterministic_and_seed_dependent():
    y = np.array([1] * 30 + [-1] * 50)
    a, b = stratified_kfold(y, 5, 7), stratified_kfold(y, 5, 7)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    c = stratified_kfold(y, 5, 8)
    assert any(not np.array_equal(p, q) for p, q in zip(a, c))


def test_haberman_fold_sizes(haberman):
    folds = stratified_kfold(haberman, 5, 0)
    assert sorted(len(f) for f in folds) == [61, 61, 61, 61, 62]
    y = haberman.labels
    share = (y == 1).mean()
    for f in folds:
        assert abs((y[f] == 1).sum() - share * len(f)) <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.integers(2, 6), st.integers(0, 10**6))
def test_folds_partition(n_pos, n_neg, k, seed):
    if min(n_pos, n_neg) < k:
        with pytest.raises(ConfigurationError):
            stratified_kfold(np.array([1] * n_pos + [-1] * n_neg), k, seed)
        return
    y = np.array([1] * n_pos + [-1] * n_neg)
    folds = stratified_kfold(y, k, seed)
    joined = np.concatenate(folds)
    assert sorted(joined.tolist()) == list(range(y.size))
    for cls in (1, -1):
        counts = [int((y[f] == cls).sum()) for f in folds]
        assert max(counts) - min(counts) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_stratified_split():
    y = np.array([1] * 20 + [-1] * 80)
    train, test = stratified_split(y, 0.8, 1)
    assert (y[train] == 1).sum() == 16 and (y[train] == -1).sum() == 64
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))


def test_separable_toy_is_perfect():
    report = cross_validate(toy(), CVConfig(kind="linear-hard"))
    assert report.test_accuracy == {"mean": 100.0, "std": 0.0, "n": 5}
    assert all(f.sv_count is None for f in report.folds)
    assert "n/a" in report.to_csv()


def test_label_flip_gives_same_accuracy():
    ds = toy(4)
    rng = np.random.default_rng(0)
    X = ds.features + rng.normal(size=ds.features.shape) * 2.0
    folds = stratified_kfold(ds.labels, 5, 0)
    a = cross_validate(Dataset(X, ds.labels), CVConfig(kind="linear", C=1.0, fuzzy=True), folds)
    b = cross_validate(Dataset(X, -ds.labels), CVConfig(kind="linear", C=1.0, fuzzy=True), folds)
    assert [f.test_accuracy for f in a.folds] == [f.test_accuracy for f in b.folds]


def test_mean_is_arithmetic_mean(haberman):
    report = cross_validate(haberman, CVConfig(kind="linear", C=1.0, fuzzy=True))
    accs = [f.test_accuracy for f in report.folds]
    assert abs(report.test_accuracy["mean"] - sum(accs) / len(accs)) <= 1e-12
    mean = sum(accs) / len(accs)
    std = (sum((a - mean) ** 2 for a in accs) / (len(accs) - 1)) ** 0.5
    assert report.test_accuracy["std"] == pytest.approx(std, abs=1e-12)
    d = json.loads(report.to_json())
    assert d["metadata"]["std"].startswith("sample")


def test_report_is_byte_identical(haberman):
    cfg = CVConfig(kind="kernel", C=1.0, gamma=0.01, fuzzy=True, seed=5)
    assert cross_validate(haberman, cfg).to_json() == cross_validate(haberman, cfg).to_json()


def test_failed_folds_are_recorded():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]] * 5, float)
    y = np.array([1, 1, -1, -1] * 5)
    report = cross_validate(Dataset(X, y), CVConfig(kind="linear-hard", folds=2))
    assert [f.status for f in report.folds] == ["failed", "failed"]
    assert "Infeasible" in report.folds[0].message
    assert not report.ok
    assert report.test_accuracy["n"] == 0


def test_no_test_set_leakage(monkeypatch):
    ds = toy(6)
    seen = []
    real = evaluation.fit_model

    def spy(config, X, y):
        model = real(config, X, y)
        seen.append((model.w.copy(), model.b, model.standardization.mean.copy()))
        return model

    monkeypatch.setattr(evaluation, "fit_model", spy)
    cfg = CVConfig(kind="linear", C=1.0, fuzzy=True)
    folds = stratified_kfold(ds.labels, 5, 0)
    cross_validate(ds, cfg, folds)
    before = list(seen)
    seen.clear()
    X = ds.features.copy()
    X[folds[0][0]] += 100.0  # move one test row of fold 0 far away
    cross_validate(Dataset(X, ds.labels), cfg, folds)
    w0, b0, m0 = before[0]
    w1, b1, m1 = seen[0]
    assert np.array_equal(w0, w1) and b0 == b1 and np.array_equal(m0, m1)


def test_grid_single_point():
    cfg = CVConfig(kind="kernel", C_grid=(2.0,), gamma_grid=(0.5,))
    result = grid_search(toy(), cfg)
    assert (result.best_C, result.best_gamma) == (2.0, 0.5)
    assert len(result.table) == 1


def test_grid_picks_perfect_point():
    ds = toy(1)
    cfg = CVConfig(kind="kernel", C_grid=(1.0,), gamma_grid=(1e-5, 0.1))
    result = grid_search(ds, cfg)
    acc = {row["gamma"]: row["mean_accuracy"] for row in result.table}
    assert acc[0.1] == 100.0
    if acc[1e-5] < 100.0:
        assert result.best_gamma == 0.1
    else:
        assert result.best_gamma == 1e-5  # tie goes to the smaller gamma


def test_grid_ties_prefer_smaller_C_then_gamma():
    cfg = CVConfig(kind="kernel", C_grid=(10.0, 1.0), gamma_grid=(0.2, 0.1))
    result = grid_search(toy(), cfg)
    assert all(row["mean_accuracy"] == 100.0 for row in result.table)
    assert (result.best_C, result.best_gamma) == (1.0, 0.1)
    assert result.best.metadata["selection"] == "non-nested"


def test_grid_linear_ignores_gamma():
    result = grid_search(toy(), CVConfig(kind="linear", C_grid=(0.1, 1.0)))
    assert [row["gamma"] for row in result.table] == [None, None]


def test_threads_do_not_change_result(monkeypatch):
    cfg = CVConfig(kind="kernel", C_grid=(0.1, 1.0), gamma_grid=(0.1, 1.0), seed=2)
    ds = toy(3)
    serial = grid_search(ds, cfg, workers=1)
    monkeypatch.setenv("FATMARGIN_THREADS", "3")
    threaded = grid_search(ds, cfg)
    assert serial.to_json() == threaded.to_json()


def test_empty_grid_rejected():
    with pytest.raises(ConfigurationError):
        grid_search(toy(), CVConfig(kind="linear", C_grid=()))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CVConfig(kind="svm")
    with pytest.raises(ConfigurationError):
        CVConfig(folds=1)
    with pytest.raises(ConfigurationError):
        CVConfig(kind="kernel", gamma=None).kernel_spec()


def test_table_and_rows(haberman):
    report = cross_validate(haberman, CVConfig(kind="linear", C=10.0, fuzzy=True))
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "dataset,kind,C,gamma,fold,acc,sv_count,seed"
    assert len(lines) == 6 and lines[1].startswith("haberman,linear,10.0,,0,")
    assert "test accuracy" in report.to_table()
