import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toporad.learn import (
    ClassifierModel,
    ClassStarvation,
    Hyper,
    TrainingDiverged,
    auc_score,
    evaluate,
    fit,
    kfold_cv,
    local_contributions,
    logits,
    metrics_from_scores,
    permutation_importance,
    predict,
    predict_proba,
    roc_curve,
    split,
    stratified_folds,
    train_logistic,
)
from toporad.tables import FeatureTable

NOSEL = Hyper(select=False)


def table(X, y, ids=None):
    X = np.asarray(X, float)
    names = tuple(f"f{j}" for j in range(X.shape[1]))
    return FeatureTable(X, y, ids or [f"s{i}" for i in range(len(y))], names=names)


def one_signal(seed, n=200, k=5):
    r = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = r.normal(size=(n, k))
    X[:, 2] += 2.5 * (2 * y - 1)
    return table(X, y)


def test_split_ten_rows():
    t = table(np.arange(10)[:, None], [0, 1] * 5)
    tr, te = split(t, 0.7, seed=3)
    assert (len(tr), len(te)) == (7, 3)
    assert set(t.y[te]) == {0, 1}
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(10))
    a, b = split(t, 0.7, seed=3)
    np.testing.assert_array_equal(a, tr)
    np.testing.assert_array_equal(b, te)


@given(st.integers(10, 80), st.integers(3, 40), st.integers(0, 100), st.floats(0.3, 0.8))
def test_split_stratified(n, n_pos, seed, frac):
    n_pos = min(n_pos, n - 3)
    y = np.array([1] * n_pos + [0] * (n - n_pos))
    t = table(np.zeros((n, 1)), y)
    try:
        tr, te = split(t, frac, seed)
    except ClassStarvation:
        return
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == n
    assert abs(t.y[tr].sum() - frac * n_pos) <= 1
    assert abs((1 - t.y[tr]).sum() - frac * (n - n_pos)) <= 1


def test_split_errors():
    with pytest.raises(ValueError):
        split(table(np.zeros((9, 1)), [0, 1] * 4 + [0]))
    with pytest.raises(ClassStarvation):
        split(table(np.zeros((12, 1)), [0] * 11 + [1]))


def test_group_split_keeps_sources_together():
    ids = [f"p{i // 4}" for i in range(40)]
    t = table(np.zeros((40, 1)), [(i // 4) % 2 for i in range(40)], ids)
    tr, te = split(t, 0.7, seed=1, group_by_source=True)
    assert not {ids[i] for i in tr} & {ids[i] for i in te}


def test_folds():
    y = np.arange(100) % 2
    folds = stratified_folds(y, 5, seed=0)
    assert [len(f) for f in folds] == [20] * 5
    assert sorted(np.concatenate(folds).tolist()) == list(range(100))
    assert all(y[f].sum() == 10 for f in folds)
    with pytest.raises(ClassStarvation):
        stratified_folds([0] * 10 + [1] * 4, 5)


def test_cv_separable_and_duplicate():
    x = np.concatenate([np.linspace(-2, -0.5, 50), np.linspace(0.5, 2, 50)])
    y = (x > 0).astype(int)
    res = kfold_cv(table(x[:, None], y), 5, 0, NOSEL)
    assert res.mean()["accuracy"] == 1.0
    dup = table(np.tile([[0.0], [1.0]], (25, 1)), [0, 1] * 25)
    res = kfold_cv(dup, 5, 0, NOSEL)
    assert all(v == 0 for v in res.std().values())


def test_train_separable_1d():
    x = np.array([-2, -1.5, -1, -0.5, 0.5, 1, 1.5, 2])[:, None]
    y = (x[:, 0] > 0).astype(int)
    w, b, _ = train_logistic(x, y)
    assert w[0] > 0
    assert ((x @ w + b > 0) == y).all()


def test_xor_not_separable():
    Z = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], float)
    y = np.array([0, 1, 1, 0])
    w, b, _ = train_logistic(Z, y)
    assert ((Z @ w + b >= 0) == y).mean() <= 0.75
    # exhaustive check: no linear rule does better than 3 of 4
    best = 0
    for w0, w1, b0 in itertools.product(np.linspace(-2, 2, 21), repeat=3):
        best = max(best, ((Z @ [w0, w1] + b0 >= 0) == y).mean())
    assert best <= 0.75


def test_label_flip_negates(rng):
    Z = rng.normal(size=(50, 3))
    y = (Z[:, 0] + 0.5 * rng.normal(size=50) > 0).astype(int)
    w, b, _ = train_logistic(Z, y)
    w2, b2, _ = train_logistic(Z, 1 - y)
    np.testing.assert_allclose(w2, -w, atol=1e-6)
    assert b2 == pytest.approx(-b, abs=1e-6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_training_reported():
    Z = np.array([[1e200], [-1e200]])
    with pytest.raises(TrainingDiverged):
        train_logistic(Z, [1, 0], Hyper(learning_rate=1e300))


def test_training_reproducible():
    t = one_signal(4)
    a, _ = fit(t)
    b, _ = fit(t)
    assert a.to_json() == b.to_json()


def test_auc_examples():
    assert auc_score([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0
    m = metrics_from_scores([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])
    assert m.accuracy == 1.0
    assert auc_score([0.9, 0.6, 0.6, 0.2], [1, 0, 1, 0]) == 0.875
    with pytest.raises(ValueError):
        auc_score([0.2, 0.4], [1, 1])


def _pair_auc(s, y):
    pos = [a for a, l in zip(s, y) if l == 1]
    neg = [a for a, l in zip(s, y) if l == 0]
    return sum((p > q) + 0.5 * (p == q) for p in pos for q in neg) / (len(pos) * len(neg))


labelled = st.lists(st.tuples(st.integers(0, 6).map(lambda v: v / 6), st.integers(0, 1)), min_size=2, max_size=30)


@given(labelled)
def test_metrics_identities(data):
    s, y = map(np.array, zip(*data))
    if len(set(y.tolist())) < 2:
        return
    m = metrics_from_scores(s, y)
    assert m.auc == pytest.approx(_pair_auc(s, y), abs=1e-12)
    assert m.misclassification_rate == pytest.approx(1 - m.accuracy, abs=1e-15)
    if m.precision + m.recall:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
    fpr = [r[1] for r in m.roc]
    tpr = [r[2] for r in m.roc]
    assert (fpr[0], tpr[0]) == (0.0, 0.0) and (fpr[-1], tpr[-1]) == (1.0, 1.0)
    assert fpr == sorted(fpr) and tpr == sorted(tpr)
    # strictly increasing transform keeps the AUC
    assert auc_score(np.exp(3 * s), y) == m.auc


def test_roc_thresholds():
    roc = roc_curve([0.9, 0.6, 0.6, 0.2], [1, 0, 1, 0])
    assert roc == [(math.inf, 0.0, 0.0), (0.9, 0.0, 0.5), (0.6, 0.5, 1.0), (0.2, 1.0, 1.0)]


def test_model_json_round_trip():
    model, _ = fit(one_signal(0))
    back = ClassifierModel.from_json(model.to_json())
    assert back.to_json() == model.to_json()
    X = one_signal(1).X
    np.testing.assert_array_equal(predict_proba(back, X), predict_proba(model, X))
    doc = model.to_json()
    for key in ("means", "stds", "selected", "weights", "bias", "hyper", "schema_version"):
        assert f'"{key}"' in doc
    with pytest.raises(ValueError):
        ClassifierModel.from_json(doc.replace('"schema_version": 1', '"schema_version": 99'))


def test_selection_inside_fit():
    model, report = fit(one_signal(0))
    assert model.selected[2] and len(model.weights) == model.selected.sum()
    assert report is not None and "f2" in report.kept


def test_local_contributions_identity(rng):
    model, _ = fit(one_signal(2))
    X = rng.normal(size=(25, 5)) * 3
    for x in X:
        c = local_contributions(model, x)
        assert c.sum() + model.bias == pytest.approx(float(logits(model, x[None])[0]), abs=1e-12)
        z = model.transform(x[None])[0]
        np.testing.assert_array_equal(np.sign(c[model.selected]), np.sign(model.weights * z))
        assert not c[~model.selected].any()


def test_zero_vector_contributions():
    model, _ = fit(one_signal(3))
    c = local_contributions(model, model.means)
    assert not c.any()
    assert predict_proba(model, model.means[None])[0] == pytest.approx(1 / (1 + math.exp(-model.bias)))


def test_permutation_importance_cases():
    t = one_signal(5)
    model, _ = fit(t, NOSEL)
    imp = permutation_importance(model, t.X, t.y, 10, 0)
    assert int(np.argmax(imp)) == 2 and imp[2] > max(np.delete(imp, 2))
    zero = ClassifierModel(model.names, model.means, model.stds, model.selected, np.zeros(5), 0.3, NOSEL)
    assert np.all(np.abs(permutation_importance(zero, t.X, t.y)) < 1e-12)


def test_joint_shuffle_hits_majority_rate():
    # with every feature scrambled, a constant predictor scores the majority rate
    t = one_signal(6, n=101)
    model, _ = fit(t, NOSEL)
    shuffled = np.zeros_like(t.X) + model.means
    acc = float((predict(model, shuffled) == t.y).mean())
    assert acc == pytest.approx(max(t.y.mean(), 1 - t.y.mean()))


def test_evaluate_single_class_error():
    model, _ = fit(one_signal(0))
    with pytest.raises(ValueError):
        evaluate(model, one_signal(0).X[:3], [1, 1, 1])
