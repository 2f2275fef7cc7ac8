"""Set-level floating forward selection and per-feature t-test filtering."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classify import KnnModel, stratified_folds
from .ingest import ClassLabel
from .stats import pooled_t_columns

PAIRS = ((1, 2), (1, 3), (2, 3))


def pair_name(a: int, b: int) -> str:
    return f"{ClassLabel(a).name}-{ClassLabel(b).name}"


@dataclass(frozen=True)
class SfffsConfig:
    criterion_folds: int = 5
    knn_k: int = 5
    seed: int = 0
    max_sets: int = 6
    # stop at the first forward step that does not raise the criterion
    stop_early: bool = False

    def __post_init__(self):
        if self.criterion_folds < 2:
            raise ValueError("criterion_folds must be >= 2")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.max_sets < 1:
            raise ValueError("max_sets must be >= 1")


@dataclass(frozen=True)
class TraceStep:
    kind: str  # "add" or "remove"
    set_name: str
    criterion: float
    accepted: bool = True  # the step produced a new best subset


@dataclass
class SelectionOutcome:
    selected_sets: list[str]
    trace: list[TraceStep]
    criterion: float
    feature_mask: np.ndarray | None = None
    pairwise_significant_counts: dict[str, int] = field(default_factory=dict)
    degenerate_count: int = 0
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "skipped": self.skipped,
            "selected_sets": list(self.selected_sets),
            "criterion": None if np.isnan(self.criterion) else self.criterion,
            "trace": [
                {"step": s.kind, "set": s.set_name, "criterion": s.criterion, "accepted": s.accepted}
                for s in self.trace
            ],
            "pairwise_significant_counts": dict(self.pairwise_significant_counts),
            "degenerate_features": self.degenerate_count,
            "mask_length": None if self.feature_mask is None else int(self.feature_mask.size),
            "mask_indices": None
            if self.feature_mask is None
            else [int(i) for i in np.flatnonzero(self.feature_mask)],
        }


class CrossValidatedKnn:
    """Mean stratified k-fold KNN accuracy of a column subset, memoized per subset."""

    def __init__(self, x, labels, cfg: SfffsConfig):
        self.x = np.asarray(x, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.k = cfg.knn_k
        self.folds = stratified_folds(self.labels, cfg.criterion_folds, cfg.seed)
        self._cache: dict[tuple[int, ...], float] = {}

    def __call__(self, columns: np.ndarray) -> float:
        key = tuple(int(c) for c in columns)
        if key not in self._cache:
            self._cache[key] = self._score(np.asarray(columns, dtype=int))
        return self._cache[key]

    def _score(self, columns: np.ndarray) -> float:
        xs = self.x[:, columns]
        accs = []
        for fold in self.folds:
            train = np.setdiff1d(np.arange(len(self.labels)), fold)
            ytr = self.labels[train]
            model = KnnModel.fit(xs[train], ytr, k=min(self.k, len(train)))
            if model.x.shape[1] == 0:
                # nothing informative survives: predict the majority training class
                pred = np.full(len(fold), np.bincount(ytr).argmax())
            else:
                pred = model.predict(xs[fold])
            accs.append(np.mean(pred == self.labels[fold]))
        return float(np.mean(accs))


def _columns(groups: Mapping[str, np.ndarray], names) -> np.ndarray:
    order = list(groups)
    parts = [np.asarray(groups[n], dtype=int) for n in sorted(names, key=order.index)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


def sfffs_select_sets(
    x,
    labels,
    groups: Mapping[str, Sequence[int]],
    cfg: SfffsConfig = SfffsConfig(),
    criterion: CrossValidatedKnn | None = None,
) -> SelectionOutcome:
    """Sequential forward floating search over feature groups (training data only).

    ``groups`` maps group name to its column indices in ``x``; its iteration
    order breaks ties. Each forward step adds the group giving the highest
    criterion. After it, the group whose removal gives the highest criterion
    is dropped as long as that beats the best subset already recorded at the
    smaller size. Forward steps continue up to ``cfg.max_sets`` groups and the
    best recorded subset is returned (smaller subsets win ties).

    With ``cfg.stop_early`` the search instead stops at the first forward step
    that does not strictly raise the criterion, and removals must strictly
    raise the current criterion.
    """
    groups = {str(k): np.asarray(v, dtype=int) for k, v in groups.items()}
    names = list(groups)
    J = criterion or CrossValidatedKnn(x, labels, cfg)
    limit = min(cfg.max_sets, len(names))

    selected: list[str] = []
    current = -np.inf
    best_at: dict[int, tuple[float, list[str]]] = {}
    best_so_far = -np.inf
    trace: list[TraceStep] = []

    def record(kind: str, name: str, j: float) -> None:
        nonlocal best_so_far
        size = len(selected)
        if size not in best_at or j > best_at[size][0]:
            best_at[size] = (j, list(selected))
        trace.append(TraceStep(kind, name, j, accepted=j > best_so_far))
        best_so_far = max(best_so_far, j)

    while len(selected) < limit:
        best_name, best_j = None, -np.inf
        for n in names:
            if n in selected:
                continue
            j = J(_columns(groups, selected + [n]))
            if j > best_j:
                best_name, best_j = n, j
        if cfg.stop_early and not best_j > current:
            break
        selected.append(best_name)
        current = best_j
        record("add", best_name, current)

        while len(selected) > 1:
            drop_name, drop_j = None, -np.inf
            for n in selected:
                j = J(_columns(groups, [s for s in selected if s != n]))
                if j > drop_j:
                    drop_name, drop_j = n, j
            bar = current if cfg.stop_early else best_at[len(selected) - 1][0]
            if not drop_j > bar:
                break
            selected.remove(drop_name)
            current = drop_j
            record("remove", drop_name, current)

    if not best_at:
        return SelectionOutcome([], trace, float("nan"))
    if cfg.stop_early:
        final_j, final = current, selected
    else:
        top = max(j for j, _ in best_at.values())
        size = min(k for k, (j, _) in best_at.items() if j == top)
        final_j, final = best_at[size]
    return SelectionOutcome(sorted(final, key=names.index), trace, float(final_j))


def exhaustive_search(x, labels, groups: Mapping[str, Sequence[int]], cfg: SfffsConfig = SfffsConfig(),
                      criterion: CrossValidatedKnn | None = None) -> tuple[list[str], float]:
    """Best nonempty group subset by brute force (smallest, then first in order, on ties)."""
    groups = {str(k): np.asarray(v, dtype=int) for k, v in groups.items()}
    names = list(groups)
    J = criterion or CrossValidatedKnn(x, labels, cfg)
    best, best_j = None, -np.inf
    for size in range(1, len(names) + 1):
        for combo in itertools.combinations(names, size):
            j = J(_columns(groups, combo))
            if j > best_j:
                best, best_j = list(combo), j
    return best, float(best_j)


@dataclass
class SignificanceResult:
    mask: np.ndarray
    pairwise_counts: dict[str, int]
    degenerate_count: int
    p_values: dict[str, np.ndarray]


def significance_filter(x, labels, alpha: float = 0.05, rule: str = "union") -> SignificanceResult:
    """Keep features whose pooled t-test p-value is below ``alpha`` for the class pairs.

    ``rule="union"`` keeps a feature significant in at least one of the three
    class pairs; ``"intersection"`` requires all three. Columns constant across
    every training subject are excluded and counted as degenerate.
    """
    if rule not in ("union", "intersection"):
        raise ValueError(f"unknown combination rule {rule!r}")
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    for c in ClassLabel:
        if np.sum(labels == c) < 2:
            raise ValueError(f"class {c.name} has fewer than 2 training subjects")
    constant = np.all(x == x[:1], axis=0)
    sig_any = np.zeros(x.shape[1], dtype=bool)
    sig_all = np.ones(x.shape[1], dtype=bool)
    counts, pvals = {}, {}
    for a, b in PAIRS:
        _, _, p, _ = pooled_t_columns(x[labels == a], x[labels == b])
        sig = (p < alpha) & ~constant
        name = pair_name(a, b)
        counts[name] = int(sig.sum())
        pvals[name] = p
        sig_any |= sig
        sig_all &= sig
    mask = sig_any if rule == "union" else sig_all
    return SignificanceResult(mask & ~constant, counts, int(constant.sum()), pvals)
