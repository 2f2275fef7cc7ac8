"""Synthetic ROI cohorts with class-dependent phase coupling and amplitude.

Every region is a sum of three in-band sinusoids plus white noise. For each
coupled pair ``(i, j)`` the sinusoids of region ``j`` (dominant one included)
take region ``i``'s frequencies and phases, rotated by a constant offset plus a
slowly varying jitter whose per-sample marginal is von Mises with
concentration ``kappa``. The clean analytic signals then satisfy
``z_j(t) = exp(1j * (offset + jitter(t))) * z_i(t)``, so the expected phase
locking value of the pair is ``I1(kappa) / I0(kappa)``, and exactly 1 without
jitter.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import special
from scipy.ndimage import gaussian_filter1d

from .ingest import ClassLabel, RoiTimeSeries, SubjectCohort, SubjectRecord, write_roi_csv

BAND = (0.01, 0.1)
TONE_WEIGHTS = (1.0, 0.5, 0.5)  # first tone is the dominant one
JITTER_SMOOTHING = 6.0  # samples (gaussian sigma)


@dataclass(frozen=True)
class ClassParams:
    kappa: float = 2.0
    amplitude: float = 1.0
    noise: float = 0.5
    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    regions: int = 16
    timepoints: int = 140
    dt: float = 3.0
    subjects_per_class: int = 20
    seed: int = 0
    classes: dict = field(default_factory=dict)  # int label -> ClassParams

    def __post_init__(self):
        if self.regions < 2:
            raise ValueError("need at least 2 regions")
        if self.timepoints < 32:
            raise ValueError("need at least 32 timepoints")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < BAND[1] < 0.5 / self.dt:
            raise ValueError(f"dt={self.dt} puts {BAND[1]} Hz above Nyquist")
        for label, p in self.classes.items():
            ClassLabel(int(label))
            for i, j in p.pairs:
                if not (0 <= i < self.regions and 0 <= j < self.regions and i != j):
                    raise ValueError(f"coupled pair {(i, j)} invalid for {self.regions} regions")

    def params(self, label) -> ClassParams:
        return self.classes.get(int(label), ClassParams())


def default_pairs(regions: int) -> tuple[tuple[int, int], ...]:
    """Couple (0,1), (2,3), ... over the first half of the regions."""
    half = max(2, regions // 2)
    return tuple((i, i + 1) for i in range(0, half - 1, 2))


def _preset_classes(name: str, regions: int) -> dict:
    pairs = default_pairs(regions)
    if name == "separable":
        return {
            1: ClassParams(kappa=0.5, amplitude=1.0, noise=0.5, pairs=pairs),
            2: ClassParams(kappa=3.0, amplitude=1.5, noise=0.5, pairs=pairs),
            3: ClassParams(kappa=math.inf, amplitude=2.0, noise=0.5, pairs=pairs),
        }
    if name == "hard":
        return {
            1: ClassParams(kappa=1.0, amplitude=1.2, noise=0.8, pairs=pairs),
            2: ClassParams(kappa=1.5, amplitude=1.3, noise=0.8, pairs=pairs),
            3: ClassParams(kappa=4.0, amplitude=1.6, noise=0.8, pairs=pairs),
        }
    if name == "null":
        same = ClassParams(kappa=2.0, amplitude=1.5, noise=0.5, pairs=pairs)
        return {1: same, 2: same, 3: same}
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("separable", "hard", "null")


def preset(name: str, **overrides) -> SynthConfig:
    regions = overrides.get("regions", SynthConfig.regions)
    return SynthConfig(classes=_preset_classes(name, regions), **overrides)


def expected_plv(kappa: float) -> float:
    """Mean resultant length of a von Mises jitter: I1(kappa) / I0(kappa)."""
    if math.isinf(kappa):
        return 1.0
    return float(special.i1e(kappa) / special.i0e(kappa))


def von_mises_jitter(kappa: float, n: int, rng: np.random.Generator, smoothing: float | None = None):
    """Temporally smooth jitter with a von Mises(0, kappa) marginal at every sample."""
    if math.isinf(kappa):
        return np.zeros(n)
    smoothing = JITTER_SMOOTHING if smoothing is None else smoothing
    g = gaussian_filter1d(rng.standard_normal(n + 8 * int(smoothing)), smoothing, mode="wrap")
    g = g[: n] / g.std()
    u = special.ndtr(g)
    if kappa == 0:
        return 2 * np.pi * (u - 0.5)
    grid, cdf = _von_mises_cdf_table(float(kappa))
    return np.interp(u, cdf, grid)


@functools.lru_cache(maxsize=64)
def _von_mises_cdf_table(kappa: float, size: int = 8193):
    grid = np.linspace(-np.pi, np.pi, size)
    # density up to a constant; exp(kappa*(cos-1)) avoids overflow at large kappa
    dens = np.exp(kappa * (np.cos(grid) - 1.0))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
    return grid, cdf / cdf[-1]


def subject_id(label, index: int) -> str:
    return f"{ClassLabel(int(label)).name}_{index:03d}"


def generate_clean(cfg: SynthConfig, label, index: int) -> tuple[np.ndarray, np.random.Generator]:
    """Noise-free region signals (N x T) and the generator positioned for the noise draw."""
    rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, int(label), index])
    p = cfg.params(label)
    n, t = cfg.regions, cfg.timepoints
    time = np.arange(t) * cfg.dt
    freqs = rng.uniform(*BAND, size=(n, 3))
    phases = rng.uniform(-np.pi, np.pi, size=(n, 3))
    offsets = rng.uniform(-np.pi, np.pi, size=n)
    # arguments of each tone over time: (n, 3, t)
    args = 2 * np.pi * freqs[:, :, None] * time + phases[:, :, None]
    for i, j in p.pairs:
        jitter = von_mises_jitter(p.kappa, t, rng)
        args[j] = args[i] + offsets[j] + jitter
    w = np.asarray(TONE_WEIGHTS)[None, :, None]
    clean = p.amplitude * np.sum(w * np.cos(args), axis=1)
    return clean, rng


def generate_subject(cfg: SynthConfig, label, index: int) -> RoiTimeSeries:
    clean, rng = generate_clean(cfg, label, index)
    p = cfg.params(label)
    data = clean + p.noise * rng.standard_normal(clean.shape)
    names = tuple(f"R{k:03d}" for k in range(cfg.regions))
    return RoiTimeSeries(subject_id(label, index), data, dt=cfg.dt, region_names=names)


def generate_cohort(cfg: SynthConfig, out_dir) -> SubjectCohort:
    """Write ``manifest.csv`` and ``subjects/<id>.csv`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "subjects").mkdir(parents=True, exist_ok=True)
    records = []
    for label in ClassLabel:
        for idx in range(cfg.subjects_per_class):
            ts = generate_subject(cfg, label, idx)
            rel = Path("subjects") / f"{ts.subject_id}.csv"
            write_roi_csv(ts, out / rel)
            records.append(SubjectRecord(ts.subject_id, label, out / rel))
    with (out / "manifest.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", "path"])
        for r in records:
            w.writerow([r.subject_id, int(r.label), r.path.relative_to(out).as_posix()])
    return SubjectCohort(records, region_count=cfg.regions)


def with_overrides(cfg: SynthConfig, **kw) -> SynthConfig:
    if "regions" in kw and kw["regions"] != cfg.regions:
        # re-derive coupled pairs for the new region count
        classes = {k: replace(v, pairs=default_pairs(kw["regions"])) for k, v in cfg.classes.items()}
        kw = {**kw, "classes": classes}
    return replace(cfg, **kw)


SET_NAMES = ("IPPow", "IEPow", "IPEnt", "IEEnt", "PLV", "MSC")


def set_family(seed: int, per_class: int = 27):
    """Random six-group feature table for selection benchmarks.

    One to three groups carry Gaussian class-mean shifts of random strength;
    the rest are pure noise. Returns ``(x, labels, groups, informative)``.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat([1, 2, 3], per_class)
    informative = set(rng.choice(6, size=rng.integers(1, 4), replace=False).tolist())
    blocks, groups, start = [], {}, 0
    for k, name in enumerate(SET_NAMES):
        d = int(rng.integers(2, 9))
        strength = rng.uniform(0.5, 1.5) if k in informative else 0.0
        centers = rng.standard_normal((3, d)) * strength
        blocks.append(rng.standard_normal((labels.size, d)) + centers[labels - 1])
        groups[name] = np.arange(start, start + d)
        start += d
    return np.hstack(blocks), labels, groups, {SET_NAMES[k] for k in informative}
