"""Power, entropy and coherency features of instantaneous phase and envelope."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ingest import RoiTimeSeries
from .sigproc import FilterSpec, TfpConfig, tfp_estimate


class FeatureSetId(enum.IntEnum):
    IPPow = 0
    IEPow = 1
    IPEnt = 2
    IEEnt = 3
    PLV = 4
    MSC = 5


@dataclass(frozen=True)
class CoherencyMatrix:
    values: np.ndarray
    kind: str  # "PLV" or "MSC"

    def upper(self) -> np.ndarray:
        """Strict upper triangle, row-major."""
        iu = np.triu_indices(self.values.shape[0], k=1)
        return self.values[iu]


@dataclass(frozen=True)
class EntropyConfig:
    bins: int = 16
    log_base: float = 2.0

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("entropy needs at least 2 bins")
        if not self.log_base > 0 or self.log_base == 1:
            raise ValueError(f"invalid log base {self.log_base}")


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 64
    overlap_fraction: float = 0.5
    window: str = "hann"
    band: tuple[float, float] = (0.01, 0.1)
    reduce: str = "mean"

    def __post_init__(self):
        if self.segment_length < 8:
            raise ValueError("Welch segment_length must be >= 8")
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}; use 'hann' or 'rectangular'")
        if self.reduce not in ("mean", "max"):
            raise ValueError(f"unknown reduction {self.reduce!r}; use 'mean' or 'max'")

    @property
    def step(self) -> int:
        return max(1, self.segment_length - int(round(self.overlap_fraction * self.segment_length)))

    def n_segments(self, t: int) -> int:
        if t < self.segment_length:
            return 0
        return (t - self.segment_length) // self.step + 1


@dataclass(frozen=True)
class FeatureLayout:
    """Index map of the concatenated per-subject feature vector."""

    n_regions: int
    region_names: tuple[str, ...] | None = None

    @property
    def n_pairs(self) -> int:
        return self.n_regions * (self.n_regions - 1) // 2

    def size(self, fs: FeatureSetId) -> int:
        return self.n_regions if fs <= FeatureSetId.IEEnt else self.n_pairs

    @property
    def ranges(self) -> dict[FeatureSetId, range]:
        out, start = {}, 0
        for fs in FeatureSetId:
            out[fs] = range(start, start + self.size(fs))
            start += self.size(fs)
        return out

    @property
    def length(self) -> int:
        return 4 * self.n_regions + 2 * self.n_pairs

    def indices(self, sets) -> np.ndarray:
        r = self.ranges
        parts = [np.arange(r[FeatureSetId(s)].start, r[FeatureSetId(s)].stop) for s in sorted(sets)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=int)

    def labels(self) -> list[str]:
        names = self.region_names or tuple(f"r{i}" for i in range(self.n_regions))
        iu, ju = np.triu_indices(self.n_regions, k=1)
        pairs = [f"{names[i]}|{names[j]}" for i, j in zip(iu, ju)]
        out = []
        for fs in FeatureSetId:
            items = names if fs <= FeatureSetId.IEEnt else pairs
            out.extend(f"{fs.name}:{it}" for it in items)
        return out

    def to_dict(self) -> dict:
        return {
            "n_regions": self.n_regions,
            "length": self.length,
            "sets": {fs.name: [r.start, r.stop] for fs, r in self.ranges.items()},
            "labels": self.labels(),
        }


@dataclass
class SubjectFeatures:
    subject_id: str
    vector: np.ndarray
    layout: FeatureLayout
    plv: CoherencyMatrix | None = field(default=None, repr=False)
    msc: CoherencyMatrix | None = field(default=None, repr=False)

    def get(self, fs: FeatureSetId) -> np.ndarray:
        r = self.layout.ranges[fs]
        return self.vector[r.start : r.stop]


def power_feature(seq) -> float:
    """Energy: sum of squared magnitudes."""
    seq = np.asarray(seq)
    return float(np.sum(np.abs(seq) ** 2))


def entropy_feature(seq, bins: int = 16, log_base: float = 2.0) -> float:
    """Shannon entropy of the amplitude histogram over ``[min, max]``."""
    seq = np.asarray(seq, dtype=float)
    if bins < 2:
        raise ValueError("entropy needs at least 2 bins")
    lo, hi = seq.min(), seq.max()
    if hi == lo:
        return 0.0
    counts, _ = np.histogram(seq, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / seq.size
    return float(-np.sum(p * np.log(p)) / np.log(log_base))


def _finish_matrix(m: np.ndarray, kind: str) -> CoherencyMatrix:
    m = np.clip(0.5 * (m + m.T), 0.0, 1.0)
    np.fill_diagonal(m, 1.0)
    return CoherencyMatrix(m, kind)


def plv_matrix(phases) -> CoherencyMatrix:
    """Phase locking value between every pair of rows of ``phases`` (N x T)."""
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 2 or phases.shape[0] < 2:
        raise ValueError("plv_matrix needs an (N>=2, T) array")
    u = np.exp(1j * phases)
    m = np.abs(u @ u.conj().T) / phases.shape[1]
    return _finish_matrix(m, "PLV")


def welch_cross_spectra(x, fs: float, cfg: WelchConfig) -> tuple[np.ndarray, np.ndarray]:
    """Segment-averaged cross-spectral matrix ``S[i, j, f]`` of rows of ``x``.

    Each segment is mean-removed and windowed before the FFT.
    """
    x = np.asarray(x, dtype=float)
    n, t = x.shape
    k = cfg.n_segments(t)
    if k < 2:
        raise ValueError(
            f"signal of length {t} yields {k} Welch segment(s) of length {cfg.segment_length}; need >= 2"
        )
    L = cfg.segment_length
    starts = np.arange(k) * cfg.step
    segs = np.stack([x[:, s : s + L] for s in starts], axis=1)  # (n, k, L)
    segs = segs - segs.mean(axis=-1, keepdims=True)
    win = np.hanning(L + 1)[:-1] if cfg.window == "hann" else np.ones(L)
    spec = np.fft.rfft(segs * win, axis=-1)  # (n, k, F)
    cross = np.einsum("ikf,jkf->ijf", spec, spec.conj()) / k
    freqs = np.fft.rfftfreq(L, d=1.0 / fs)
    return freqs, cross


def msc_matrix(envelopes, fs: float, cfg: WelchConfig = WelchConfig()) -> CoherencyMatrix:
    """Welch magnitude-squared coherence, reduced over the bins in ``cfg.band``."""
    envelopes = np.asarray(envelopes, dtype=float)
    if envelopes.ndim != 2 or envelopes.shape[0] < 2:
        raise ValueError("msc_matrix needs an (N>=2, T) array")
    freqs, cross = welch_cross_spectra(envelopes, fs, cfg)
    lo, hi = cfg.band
    in_band = (freqs >= lo) & (freqs <= hi)
    if not np.any(in_band):
        raise ValueError(f"no frequency bins inside band {cfg.band} at resolution {freqs[1]:.4g} Hz")
    cross = cross[:, :, in_band]
    auto = np.real(np.einsum("iif->if", cross))
    denom = auto[:, None, :] * auto[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        coh = np.where(denom > 0, np.abs(cross) ** 2 / denom, 0.0)
    m = coh.mean(axis=-1) if cfg.reduce == "mean" else coh.max(axis=-1)
    return _finish_matrix(m, "MSC")


def extract_subject_features(
    ts: RoiTimeSeries,
    spec: FilterSpec,
    tfp: TfpConfig = TfpConfig(),
    entropy_cfg: EntropyConfig = EntropyConfig(),
    welch_cfg: WelchConfig = WelchConfig(),
    ip_form: str = "unwrapped",
) -> SubjectFeatures:
    """Full per-subject chain: ensemble IP/IE per region, then all six feature sets."""
    if ip_form not in ("unwrapped", "wrapped"):
        raise ValueError(f"ip_form must be 'unwrapped' or 'wrapped', got {ip_form!r}")
    try:
        dec = tfp_estimate(ts.data, spec, tfp)
    except ValueError as exc:
        raise ValueError(f"subject {ts.subject_id}: phase/envelope estimation failed: {exc}") from exc
    ip = dec.unwrapped_phase if ip_form == "unwrapped" else dec.wrapped_phase
    ie = dec.envelope

    ip_pow = np.array([power_feature(r) for r in ip])
    ie_pow = np.array([power_feature(r) for r in ie])
    ip_ent = np.array([entropy_feature(r, entropy_cfg.bins, entropy_cfg.log_base) for r in ip])
    ie_ent = np.array([entropy_feature(r, entropy_cfg.bins, entropy_cfg.log_base) for r in ie])
    try:
        plv = plv_matrix(dec.unwrapped_phase)
        msc = msc_matrix(ie, ts.fs, welch_cfg)
    except ValueError as exc:
        raise ValueError(f"subject {ts.subject_id}: coherency features failed: {exc}") from exc

    layout = FeatureLayout(ts.n_regions, ts.region_names)
    vector = np.concatenate([ip_pow, ie_pow, ip_ent, ie_ent, plv.upper(), msc.upper()])
    return SubjectFeatures(ts.subject_id, vector, layout, plv=plv, msc=msc)


def write_matrix_csv(m: CoherencyMatrix, path) -> None:
    np.savetxt(path, m.values, delimiter=",", fmt="%.17g")
