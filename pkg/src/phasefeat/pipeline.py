"""End-to-end evaluation: split, extract, select, filter, classify, score."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import KnnModel, MetricsReport, compute_metrics, confusion_matrix, stratified_split
from .config import PipelineConfig
from .features import FeatureLayout, FeatureSetId, SubjectFeatures, extract_subject_features
from .ingest import ClassLabel, DataError, RoiTimeSeries, SubjectCohort, load_cohort_data
from .selection import SelectionOutcome, significance_filter, sfffs_select_sets

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class FeatureTable:
    subject_ids: list[str]
    labels: np.ndarray
    x: np.ndarray  # (subjects, features)
    layout: FeatureLayout
    subjects: list[SubjectFeatures] | None = field(default=None, repr=False)

    def groups(self) -> dict[str, np.ndarray]:
        return {fs.name: np.arange(r.start, r.stop) for fs, r in self.layout.ranges.items()}


def extract_features(series: list[RoiTimeSeries], labels, cfg: PipelineConfig) -> FeatureTable:
    rows: list[SubjectFeatures] = []
    spec = cfg.filter_spec()
    for ts in series:
        try:
            rows.append(
                extract_subject_features(
                    ts, spec, cfg.tfp(ts.subject_id), cfg.entropy(), cfg.welch(), cfg["features.ip_phase"]
                )
            )
        except ValueError as exc:
            raise DataError(f"subject {ts.subject_id}: {exc}") from exc
    if not rows:
        raise DataError("no subjects to extract")
    layout = rows[0].layout
    return FeatureTable(
        [r.subject_id for r in rows],
        np.asarray(labels, dtype=int),
        np.vstack([r.vector for r in rows]),
        layout,
        rows,
    )


def write_feature_table(table: FeatureTable, path) -> Path:
    """CSV with ``subject_id,label`` then one column per feature; index map as JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", *table.layout.labels()])
        for sid, lab, row in zip(table.subject_ids, table.labels, table.x):
            w.writerow([sid, int(lab), *(repr(float(v)) for v in row)])
    sidecar = path.with_suffix(".index.json")
    sidecar.write_text(json.dumps(table.layout.to_dict(), indent=1) + "\n")
    return sidecar


def read_feature_table(path) -> FeatureTable:
    path = Path(path)
    meta = json.loads(path.with_suffix(".index.json").read_text())
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, labels, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(int(ClassLabel.parse(row[1])))
            rows.append([float(v) for v in row[2:]])
    x = np.array(rows, dtype=float)
    if x.shape[1] != meta["length"] or len(header) != meta["length"] + 2:
        raise DataError(f"{path}: feature columns do not match the index map")
    return FeatureTable(ids, np.array(labels), x, FeatureLayout(meta["n_regions"]))


@dataclass
class RunResult:
    report: dict
    selection: SelectionOutcome
    model: KnnModel
    columns: np.ndarray  # feature columns fed to the classifier
    train: np.ndarray
    test: np.ndarray
    metrics: MetricsReport | None
    confusion: np.ndarray | None
    timing: dict = field(default_factory=dict)


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def select_features(table: FeatureTable, train: np.ndarray, cfg: PipelineConfig,
                    skip_selection: bool = False) -> tuple[SelectionOutcome, np.ndarray]:
    """Set selection then t-test filtering, both on training rows only.

    Returns the outcome and the absolute feature columns that survive.
    """
    groups = table.groups()
    xtr, ytr = table.x[train], table.labels[train]
    if skip_selection:
        cols = np.arange(table.x.shape[1])
        outcome = SelectionOutcome(list(groups), [], float("nan"), np.ones(cols.size, bool), skipped=True)
        return outcome, cols

    outcome = sfffs_select_sets(xtr, ytr, groups, cfg.sfffs())
    set_cols = table.layout.indices(FeatureSetId[n] for n in outcome.selected_sets)
    sig = significance_filter(xtr[:, set_cols], ytr, cfg["selection.alpha"], cfg["selection.rule"])
    outcome.feature_mask = sig.mask
    outcome.pairwise_significant_counts = sig.pairwise_counts
    outcome.degenerate_count = sig.degenerate_count
    cols = set_cols[sig.mask]
    if cols.size == 0:
        log.warning("no feature passed the significance filter; keeping all selected-set features")
        cols = set_cols
    return outcome, cols


def run_pipeline(cohort: SubjectCohort, cfg: PipelineConfig, skip_selection: bool = False,
                 series: list[RoiTimeSeries] | None = None, table: FeatureTable | None = None) -> RunResult:
    import time

    timing = {}
    labels = cohort.labels

    t0 = time.perf_counter()
    try:
        train, test = stratified_split(labels, cfg["split.per_class_test"], cfg["split.seed"])
    except ValueError as exc:
        raise StageError("split", exc) from exc
    timing["split"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if table is None:
        try:
            if series is None:
                series = load_cohort_data(cohort, dt=cfg["sampling.dt"])
            table = extract_features(series, labels, cfg)
        except (ValueError, OSError) as exc:
            raise StageError("features", exc) from exc
    timing["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        outcome, cols = select_features(table, train, cfg, skip_selection)
    except ValueError as exc:
        raise StageError("selection", exc) from exc
    timing["selection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        model = KnnModel.fit(table.x[np.ix_(train, cols)], labels[train], k=cfg["knn.k"])
        pred = model.predict(table.x[np.ix_(test, cols)]) if test.size else np.zeros(0, int)
    except ValueError as exc:
        raise StageError("classify", exc) from exc
    cm = confusion_matrix(labels[test], pred)
    metrics = compute_metrics(cm) if test.size else None
    timing["classify"] = time.perf_counter() - t0

    scaler = model.scaler
    report = {
        "version": __version__,
        "config": cfg.to_dict(),
        "cohort": {
            "subjects": len(cohort),
            "class_counts": {ClassLabel(c).name: n for c, n in cohort.class_counts().items()},
            "regions": table.layout.n_regions,
            "feature_length": table.layout.length,
            "feature_sets": {fs.name: [r.start, r.stop] for fs, r in table.layout.ranges.items()},
        },
        "split": {
            "train": [table.subject_ids[i] for i in train],
            "test": [table.subject_ids[i] for i in test],
        },
        "selection": outcome.to_dict(),
        "classifier": {
            "k": model.k,
            "n_features": int(cols.size),
            "feature_columns": [int(c) for c in cols],
            "standardization_dropped": [int(cols[i]) for i in scaler.dropped],
            "standardization_digest": _digest(scaler.mean, scaler.std, scaler.keep),
        },
        "confusion_matrix": {
            "layout": "rows=predicted, columns=true, order ALZ,MCI,NORMAL",
            "counts": cm.tolist(),
        },
        "metrics": metrics.to_dict() if metrics is not None else None,
        "predictions": [
            {"subject_id": table.subject_ids[i], "true": int(labels[i]), "predicted": int(p)}
            for i, p in zip(test, pred)
        ],
    }
    return RunResult(report, outcome, model, cols, train, test, metrics, cm, timing)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_confusion_csv(cm, path) -> None:
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(np.asarray(cm, dtype=int).tolist())


def read_confusion_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise DataError(f"{path}: confusion matrix must be 3 rows x 3 columns")
    out = np.zeros((3, 3), dtype=int)
    for i, r in enumerate(rows):
        for j, cell in enumerate(r):
            try:
                v = int(cell.strip())
            except ValueError:
                raise DataError(f"{path}: non-integer cell {cell!r} at row {i + 1}, column {j + 1}") from None
            if v < 0:
                raise DataError(f"{path}: negative count at row {i + 1}, column {j + 1}")
            out[i, j] = v
    return out
