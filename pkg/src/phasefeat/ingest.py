"""Cohort manifests and ROI time-series CSV files.

ROI files are stored timepoints-as-rows, regions-as-columns, with an optional
header row of region names. In memory, data is held region-major (N x T).
"""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_REGIONS = 2
MIN_TIMEPOINTS = 16


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ClassLabel(enum.IntEnum):
    ALZ = 1
    MCI = 2
    NORMAL = 3

    @classmethod
    def parse(cls, token: str | int) -> "ClassLabel":
        if isinstance(token, (int, np.integer)):
            return cls(int(token))
        tok = str(token).strip()
        if tok.isdigit():
            try:
                return cls(int(tok))
            except ValueError:
                pass
        else:
            try:
                return cls[tok.upper()]
            except KeyError:
                pass
        raise DataError(f"unknown label token {token!r}")


@dataclass(frozen=True)
class RoiTimeSeries:
    subject_id: str
    data: np.ndarray  # (N regions, T timepoints)
    dt: float = 3.0
    region_names: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2:
            raise DataError(f"{self.subject_id}: expected a 2-D matrix, got shape {data.shape}")
        n, t = data.shape
        if n < MIN_REGIONS:
            raise DataError(f"{self.subject_id}: need at least {MIN_REGIONS} regions, got {n}")
        if t < MIN_TIMEPOINTS:
            raise DataError(f"{self.subject_id}: need at least {MIN_TIMEPOINTS} timepoints, got {t}")
        if not np.all(np.isfinite(data)):
            r, c = np.argwhere(~np.isfinite(data))[0]
            raise DataError(f"{self.subject_id}: non-finite value at region {r}, timepoint {c}")
        if not self.dt > 0:
            raise DataError(f"{self.subject_id}: dt must be positive, got {self.dt}")
        if self.region_names is not None and len(self.region_names) != n:
            raise DataError(f"{self.subject_id}: {len(self.region_names)} names for {n} regions")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def n_timepoints(self) -> int:
        return self.data.shape[1]

    @property
    def fs(self) -> float:
        return 1.0 / self.dt


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    label: ClassLabel
    path: Path


@dataclass
class SubjectCohort:
    records: list[SubjectRecord]
    region_count: int | None = None

    def __len__(self):
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(r.label) for r in self.records], dtype=int)

    @property
    def subject_ids(self) -> list[str]:
        return [r.subject_id for r in self.records]

    def class_counts(self) -> dict[int, int]:
        counts = Counter(int(r.label) for r in self.records)
        return {int(c): counts[int(c)] for c in ClassLabel if counts[int(c)]}


@dataclass
class ValidationReport:
    class_counts: dict[int, int]
    findings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def load_manifest(path) -> SubjectCohort:
    """Read a ``subject_id,label,path`` manifest.

    Relative subject paths are resolved against the manifest's directory.
    Errors carry the 1-based file line number of the offending row.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    base = path.parent
    records: list[SubjectRecord] = []
    seen: dict[str, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["subject_id", "label", "path"]:
            raise DataError(f"{path}: header must be 'subject_id,label,path', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}: row {lineno}: expected 3 fields, got {len(row)}")
            sid, label_tok, rel = (c.strip() for c in row)
            if not sid or not rel:
                raise DataError(f"{path}: row {lineno}: empty subject_id or path")
            if sid in seen:
                raise DataError(
                    f"{path}: duplicate subject_id {sid!r} in rows {seen[sid]} and {lineno}"
                )
            try:
                label = ClassLabel.parse(label_tok)
            except DataError:
                raise DataError(f"{path}: row {lineno}: unknown label token {label_tok!r}") from None
            seen[sid] = lineno
            p = Path(rel)
            records.append(SubjectRecord(sid, label, p if p.is_absolute() else base / p))
    return SubjectCohort(records)


def _parse_float(cell: str) -> float:
    return float(cell.strip())


def load_roi_csv(path, dt: float = 3.0, subject_id: str | None = None) -> RoiTimeSeries:
    """Load a T x N ROI CSV into a region-major :class:`RoiTimeSeries`."""
    path = Path(path)
    sid = subject_id if subject_id is not None else path.stem
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    names = None
    try:
        [_parse_float(c) for c in rows[0]]
    except ValueError:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]

    width = len(names) if names is not None else len(rows[0]) if rows else 0
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        lineno = i + 1 + (names is not None)
        if len(row) != width:
            raise DataError(f"{path}: ragged row at line {lineno}: {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = _parse_float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at line {lineno}, column {j + 1}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value {cell!r} at line {lineno}, column {j + 1}")
            values[i, j] = v
    try:
        return RoiTimeSeries(sid, values.T, dt=dt, region_names=names)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_roi_csv(ts: RoiTimeSeries, path) -> None:
    """Write timepoints-as-rows with shortest round-tripping float text."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if ts.region_names is not None:
            w.writerow(ts.region_names)
        for row in ts.data.T:
            w.writerow([repr(float(v)) for v in row])


def load_subject(record: SubjectRecord, dt: float = 3.0) -> RoiTimeSeries:
    return load_roi_csv(record.path, dt=dt, subject_id=record.subject_id)


def validate_cohort(cohort: SubjectCohort, dt: float = 3.0) -> ValidationReport:
    """Check a cohort without modifying it; problems become report findings."""
    report = ValidationReport(class_counts=cohort.class_counts())
    if not cohort.records:
        report.findings.append("no subjects")
        return report
    expected = cohort.region_count
    shapes: dict[str, int] = {}
    for rec in cohort.records:
        try:
            ts = load_subject(rec, dt=dt)
        except (OSError, DataError) as exc:
            report.findings.append(f"unreadable file for subject {rec.subject_id}: {exc}")
            continue
        shapes[rec.subject_id] = ts.n_regions
    if shapes:
        if expected is None:
            expected = Counter(shapes.values()).most_common(1)[0][0]
        for sid, n in shapes.items():
            if n != expected:
                report.findings.append(
                    f"region count mismatch for subject {sid}: {n} regions, expected {expected}"
                )
    return report


def load_cohort_data(cohort: SubjectCohort, dt: float = 3.0) -> list[RoiTimeSeries]:
    """Load every subject, fixing ``cohort.region_count`` from the first file."""
    series = []
    for rec in cohort.records:
        ts = load_subject(rec, dt=dt)
        if cohort.region_count is None:
            cohort.region_count = ts.n_regions
        elif ts.n_regions != cohort.region_count:
            raise DataError(
                f"subject {rec.subject_id}: {ts.n_regions} regions, cohort has {cohort.region_count}"
            )
        series.append(ts)
    return series
