"""Splitting, standardization, k-nearest-neighbour voting and performance metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ingest import ClassLabel

log = logging.getLogger(__name__)

CLASSES = tuple(int(c) for c in ClassLabel)


def stratified_split(labels, per_class_test: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``per_class_test`` test subjects per class without replacement.

    Returns sorted ``(train, test)`` index arrays.
    """
    labels = np.asarray(labels, dtype=int)
    if per_class_test < 0:
        raise ValueError("per_class_test must be >= 0")
    rng = np.random.default_rng(seed)
    test = []
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        if len(members) <= per_class_test:
            raise ValueError(
                f"class {c} has {len(members)} subjects; need more than {per_class_test} for the test split"
            )
        test.extend(rng.choice(members, size=per_class_test, replace=False).tolist())
    test = np.array(sorted(test), dtype=int)
    train = np.setdiff1d(np.arange(len(labels)), test)
    return train, test


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Assign each index to one of ``k`` folds, balancing every class across folds."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=int)
    offset = 0
    for c in sorted(set(labels.tolist())):
        members = rng.permutation(np.flatnonzero(labels == c))
        if len(members) < k:
            raise ValueError(f"class {c} has {len(members)} subjects; need at least {k} for {k}-fold CV")
        fold_of[members] = (np.arange(len(members)) + offset) % k
        offset += len(members)
    return [np.flatnonzero(fold_of == f) for f in range(k)]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # bool mask over input features
    dropped: tuple[int, ...] = ()

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.keep.size:
            raise ValueError(f"sample dimension {x.shape[-1]} != model dimension {self.keep.size}")
        return (x[..., self.keep] - self.mean) / self.std


def standardize_fit(train) -> Standardizer:
    """Per-feature z-score parameters; zero-variance features are dropped."""
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ValueError("standardize_fit needs at least 2 training vectors")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    keep = std > 0
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    if dropped:
        log.info("dropping %d zero-variance feature(s): %s", len(dropped), list(dropped)[:20])
    return Standardizer(mean[keep], std[keep], keep, dropped)


def standardize_apply(params: Standardizer, x) -> np.ndarray:
    return params.apply(x)


@dataclass(frozen=True)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    k: int = 5
    scaler: Standardizer | None = None

    def __post_init__(self):
        if not 1 <= self.k <= len(self.y):
            raise ValueError(f"k={self.k} must lie in [1, {len(self.y)}]")

    @classmethod
    def fit(cls, x, y, k: int = 5, standardize: bool = True) -> "KnnModel":
        x = np.asarray(x, dtype=float)
        scaler = standardize_fit(x) if standardize else None
        xs = scaler.apply(x) if scaler is not None else x
        return cls(xs, np.asarray(y, dtype=int), k, scaler)

    def transform(self, samples) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        return self.scaler.apply(samples) if self.scaler is not None else samples

    def predict(self, samples) -> np.ndarray:
        samples = np.atleast_2d(self.transform(samples))
        if samples.shape[1] != self.x.shape[1]:
            raise ValueError(f"sample dimension {samples.shape[1]} != model dimension {self.x.shape[1]}")
        return np.array([_vote(self.x, self.y, s, self.k) for s in samples], dtype=int)


def _vote(x: np.ndarray, y: np.ndarray, sample: np.ndarray, k: int) -> int:
    dist = np.sqrt(((x - sample) ** 2).sum(axis=1))
    # stable sort: equal distances keep training order
    nearest = np.argsort(dist, kind="stable")[:k]
    labels, d = y[nearest], dist[nearest]
    classes, counts = np.unique(labels, return_counts=True)
    tied = classes[counts == counts.max()]
    if len(tied) == 1:
        return int(tied[0])
    mean_d = np.array([d[labels == c].mean() for c in tied])
    best = tied[mean_d == mean_d.min()]
    return int(best.min())


def knn_predict(model: KnnModel, sample) -> int:
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 1:
        raise ValueError("knn_predict takes a single sample vector")
    return int(model.predict(sample[None, :])[0])


def confusion_matrix(truth, predicted) -> np.ndarray:
    """3x3 counts, rows = predicted class, columns = true class."""
    truth = np.asarray(truth, dtype=int)
    predicted = np.asarray(predicted, dtype=int)
    if truth.shape != predicted.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {predicted.shape}")
    cm = np.zeros((3, 3), dtype=int)
    for t, p in zip(truth, predicted):
        cm[CLASSES.index(int(p)), CLASSES.index(int(t))] += 1
    return cm


METRIC_NAMES = ("AC", "PR", "SP", "SE")


@dataclass
class MetricsReport:
    per_class: dict[str, np.ndarray]  # metric -> per-class values (nan where undefined)
    macro: dict[str, float]
    raw_accuracy: float
    counts: dict[str, np.ndarray]  # TP, TN, FP, FN per class
    undefined: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def clean(v):
            return None if np.isnan(v) else float(v)

        return {
            "per_class": {
                m: {ClassLabel(c).name: clean(v) for c, v in zip(CLASSES, vals)}
                for m, vals in self.per_class.items()
            },
            "macro": {m: clean(v) for m, v in self.macro.items()},
            "raw_accuracy": float(self.raw_accuracy),
            "counts": {k: [int(x) for x in v] for k, v in self.counts.items()},
            "undefined": [[m, int(c)] for m, c in self.undefined],
        }


def one_vs_rest_counts(cm) -> dict[str, np.ndarray]:
    cm = np.asarray(cm, dtype=int)
    total = cm.sum()
    tp = np.diag(cm).copy()
    fp = cm.sum(axis=1) - tp
    fn = cm.sum(axis=0) - tp
    tn = total - tp - fp - fn
    return {"TP": tp, "TN": tn, "FP": fp, "FN": fn}


def compute_metrics(cm) -> MetricsReport:
    cm = np.asarray(cm)
    if cm.shape != (3, 3):
        raise ValueError(f"confusion matrix must be 3x3, got {cm.shape}")
    if np.any(cm < 0) or np.any(cm != np.round(cm)):
        raise ValueError("confusion matrix must hold non-negative integer counts")
    cm = cm.astype(int)
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    c = one_vs_rest_counts(cm)
    tp, tn, fp, fn = c["TP"], c["TN"], c["FP"], c["FN"]
    ratios = {
        "AC": (tp + tn, tp + tn + fp + fn),
        "PR": (tp, tp + fp),
        "SP": (tn, tn + fp),
        "SE": (tp, tp + fn),
    }
    per_class, macro, undefined = {}, {}, []
    for name, (num, den) in ratios.items():
        vals = np.full(3, np.nan)
        ok = den > 0
        vals[ok] = num[ok] / den[ok]
        undefined.extend((name, CLASSES[i]) for i in np.flatnonzero(~ok))
        per_class[name] = vals
        macro[name] = float(np.mean(vals[ok])) if ok.any() else float("nan")
    return MetricsReport(per_class, macro, float(np.trace(cm) / total), c, undefined)
