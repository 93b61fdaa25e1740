"""Patch classification: stratified splits, cross-validation, L2-regularized
logistic regression, the metric suite and two interpretability tools."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .stats import SelectionReport, Standardizer, select_features, standardize_apply, standardize_fit
from .tables import FeatureTable

SCHEMA_VERSION = 1


class ClassStarvation(ValueError):
    """A class is missing from a split or fold."""


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyper:
    lam: float = 1e-3
    learning_rate: float = 0.1
    max_epochs: int = 5000
    tolerance: float = 1e-8
    seed: int = 0
    alpha_sig: float = 0.05
    redundancy_rho: float = 0.95
    select: bool = True


@dataclass
class ClassifierModel:
    names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    selected: np.ndarray  # bool mask over names
    weights: np.ndarray  # one per selected feature
    bias: float
    hyper: Hyper = field(default_factory=Hyper)
    epochs: int = 0

    @property
    def standardizer(self) -> Standardizer:
        return Standardizer(self.means, self.stds)

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return standardize_apply(self.standardizer, X)[:, self.selected]

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "names": list(self.names),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "selected": [bool(s) for s in self.selected],
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "hyper": asdict(self.hyper),
            "epochs": self.epochs,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClassifierModel":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema {doc.get('schema_version')!r}")
        selected = np.array(doc["selected"], dtype=bool)
        weights = np.array(doc["weights"], dtype=np.float64)
        if selected.sum() != len(weights):
            raise ValueError("weight count does not match the selected features")
        return cls(
            tuple(doc["names"]),
            np.array(doc["means"], dtype=np.float64),
            np.array(doc["stds"], dtype=np.float64),
            selected,
            weights,
            float(doc["bias"]),
            Hyper(**doc["hyper"]),
            int(doc.get("epochs", 0)),
        )


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    misclassification_rate: float
    f1: float
    auc: float
    roc: list[tuple[float, float, float]]  # (threshold, fpr, tpr)

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in ("accuracy", "precision", "recall", "misclassification_rate", "f1", "auc")}


# --------------------------------------------------------------------------
# splitting


def split(table: FeatureTable, train_fraction: float = 0.7, seed: int = 0, group_by_source: bool = False):
    """Seeded stratified train/test split; returns index arrays."""
    n = len(table)
    if n < 10:
        raise ValueError("split needs at least 10 rows")
    rng = np.random.default_rng(seed)
    if group_by_source:
        train, test = _group_split(table, train_fraction, rng)
    else:
        target = int(round(train_fraction * n))
        classes = [np.nonzero(table.y == c)[0] for c in (0, 1)]
        quota = [train_fraction * len(idx) for idx in classes]
        take = [int(math.floor(q)) for q in quota]
        # largest remainder, earlier class first on ties
        for c in sorted(range(2), key=lambda c: -(quota[c] - take[c]))[: target - sum(take)]:
            take[c] += 1
        train, test = [], []
        for idx, k in zip(classes, take):
            idx = rng.permutation(idx)
            train.extend(idx[:k].tolist())
            test.extend(idx[k:].tolist())
        train, test = np.sort(train), np.sort(test)
    for name, part in (("train", train), ("test", test)):
        if len(np.unique(table.y[part])) < 2:
            raise ClassStarvation(f"{name} split lacks a class")
    return train, test


def _group_split(table: FeatureTable, train_fraction: float, rng):
    groups = sorted(set(table.source_ids))
    order = rng.permutation(len(groups))
    sizes = {g: 0 for g in groups}
    for s in table.source_ids:
        sizes[s] += 1
    chosen, total = set(), 0
    for i in order.tolist():
        if total >= train_fraction * len(table):
            break
        chosen.add(groups[i])
        total += sizes[groups[i]]
    mask = np.array([s in chosen for s in table.source_ids])
    return np.nonzero(mask)[0], np.nonzero(~mask)[0]


def stratified_folds(y, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    for c in (0, 1):
        if (y == c).sum() < k:
            raise ClassStarvation(f"class {c} has fewer than {k} rows")
    dealt = np.concatenate([rng.permutation(np.nonzero(y == c)[0]) for c in (0, 1)])
    return [np.sort(dealt[i::k]) for i in range(k)]


# --------------------------------------------------------------------------
# model


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _loss_grad(w, b, Z, y, lam):
    with np.errstate(all="ignore"):  # a non-finite loss is reported by the caller
        z = Z @ w + b
        # log(1 + e^z) - y z, stable form
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * (w @ w))
        r = _sigmoid(z) - y
        gw = Z.T @ r / len(y) + lam * w
    gb = float(r.mean())
    return loss, gw, gb


def train_logistic(Z, y, hyper: Hyper = Hyper()):
    """Full-batch gradient descent from zero; the step halves whenever the loss rises.

    Returns ``(weights, bias, epochs)``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.zeros(Z.shape[1])
    b = 0.0
    lr = hyper.learning_rate
    loss, gw, gb = _loss_grad(w, b, Z, y, hyper.lam)
    epoch = 0
    for epoch in range(1, hyper.max_epochs + 1):
        if math.sqrt(float(gw @ gw) + gb * gb) < hyper.tolerance:
            break
        w_new, b_new = w - lr * gw, b - lr * gb
        new_loss, new_gw, new_gb = _loss_grad(w_new, b_new, Z, y, hyper.lam)
        if not math.isfinite(new_loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch} (lam={hyper.lam}, lr={lr})")
        if new_loss > loss:
            lr *= 0.5
            if lr < 1e-12:
                break
            continue
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
    return w, b, epoch


def fit(table: FeatureTable, hyper: Hyper = Hyper()) -> tuple[ClassifierModel, SelectionReport | None]:
    """Standardize, select and train on ``table``."""
    st = standardize_fit(table.X)
    Z = standardize_apply(st, table.X)
    report = None
    if hyper.select and table.X.shape[1] >= 2:
        report = select_features(Z, table.y, table.names, hyper.alpha_sig, hyper.redundancy_rho)
        mask = report.mask
    else:
        mask = np.ones(table.X.shape[1], dtype=bool)
    w, b, epochs = train_logistic(Z[:, mask], table.y, hyper)
    return ClassifierModel(tuple(table.names), st.means, st.stds, mask, w, float(b), hyper, epochs), report


def logits(model: ClassifierModel, X) -> np.ndarray:
    return model.transform(X) @ model.weights + model.bias


def predict_proba(model: ClassifierModel, X) -> np.ndarray:
    return _sigmoid(logits(model, X))


def predict(model: ClassifierModel, X) -> np.ndarray:
    return (predict_proba(model, X) >= 0.5).astype(np.int64)


# --------------------------------------------------------------------------
# metrics


def auc_score(scores, y) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    pos, neg = scores[y == 1], scores[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC is undefined for a single-class sample")
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    tied = np.searchsorted(neg_sorted, pos, side="right") - below
    return float((below + 0.5 * tied).sum() / (len(pos) * len(neg)))


def roc_curve(scores, y) -> list[tuple[float, float, float]]:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    P, N = int((y == 1).sum()), int((y == 0).sum())
    out = [(math.inf, 0.0, 0.0)]
    for thr in np.unique(scores)[::-1].tolist():
        hit = scores >= thr
        out.append((thr, float((hit & (y == 0)).sum() / N), float((hit & (y == 1)).sum() / P)))
    return out


def metrics_from_scores(scores, y, threshold: float = 0.5) -> Metrics:
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    auc = auc_score(scores, y)
    pred = scores >= threshold
    tp = int((pred & (y == 1)).sum())
    fp = int((pred & (y == 0)).sum())
    fn = int((~pred & (y == 1)).sum())
    correct = int((pred == (y == 1)).sum())
    acc = correct / len(y)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(acc, precision, recall, (len(y) - correct) / len(y), f1, auc, roc_curve(scores, y))


def evaluate(model: ClassifierModel, X, y) -> Metrics:
    return metrics_from_scores(predict_proba(model, X), y)


@dataclass
class CVResult:
    folds: list[Metrics]

    def mean(self) -> dict:
        return {k: float(np.mean([m.summary()[k] for m in self.folds])) for k in self.folds[0].summary()}

    def std(self) -> dict:
        return {k: float(np.std([m.summary()[k] for m in self.folds])) for k in self.folds[0].summary()}


def kfold_cv(table: FeatureTable, k: int = 5, seed: int = 0, hyper: Hyper = Hyper()) -> CVResult:
    folds = stratified_folds(table.y, k, seed)
    out = []
    for i, held in enumerate(folds):
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        model, _ = fit(table.subset(train), hyper)
        test = table.subset(held)
        if len(np.unique(test.y)) < 2:
            raise ClassStarvation(f"fold {i} lacks a class")
        out.append(evaluate(model, test.X, test.y))
    return CVResult(out)


# --------------------------------------------------------------------------
# interpretation


def permutation_importance(model: ClassifierModel, X, y, repeats: int = 10, seed: int = 0) -> np.ndarray:
    """Mean accuracy drop when one raw feature column is shuffled."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    base = float((predict(model, X) == y).mean())
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        rng = np.random.default_rng([seed, j])
        drops = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            drops.append(base - float((predict(model, Xp) == y).mean()))
        out[j] = float(np.mean(drops))
    return out


def local_contributions(model: ClassifierModel, x) -> np.ndarray:
    """Per-feature w_j * z_j over all features; unselected ones are 0.

    ``contributions.sum() + model.bias`` is the logit of ``x``.
    """
    z = standardize_apply(model.standardizer, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
    full = np.zeros(len(model.names))
    full[model.selected] = model.weights * z[model.selected]
    return full
