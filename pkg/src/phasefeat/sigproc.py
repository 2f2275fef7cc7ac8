"""Band-pass filtering, analytic signal, instantaneous phase and envelope.

The ensemble estimator (``tfp_estimate``) perturbs the band edges of a
zero-phase Butterworth band-pass, recomputes the analytic signal for every
ensemble member and averages: arithmetic mean for the envelope, circular mean
for the phase.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

TWO_PI = 2.0 * np.pi
MAX_DITHER_RETRIES = 100


class DegenerateSampleWarning(RuntimeWarning):
    """An analytic-signal sample was exactly zero; its phase was set to 0."""


@dataclass(frozen=True)
class FilterSpec:
    f_lo: float = 0.01
    f_hi: float = 0.1
    order: int = 4
    fs: float = 1.0 / 3.0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"filter order must be >= 1, got {self.order}")
        if not 0 < self.f_lo < self.f_hi < self.fs / 2:
            raise ValueError(
                f"band edges must satisfy 0 < f_lo < f_hi < fs/2: "
                f"f_lo={self.f_lo}, f_hi={self.f_hi}, fs/2={self.fs / 2}"
            )

    @property
    def padlen(self) -> int:
        return 6 * self.order


@dataclass(frozen=True)
class FilterCoefficients:
    sos: np.ndarray
    spec: FilterSpec

    def response(self, freqs) -> np.ndarray:
        """Complex single-pass frequency response at ``freqs`` (Hz)."""
        _, h = sps.sosfreqz(self.sos, worN=np.atleast_1d(np.asarray(freqs, float)), fs=self.spec.fs)
        return h


@dataclass(frozen=True)
class TfpConfig:
    ensembles: int = 64
    dither: float = 0.01
    seed: int = 0
    input_dither_snr_db: float | None = None

    def __post_init__(self):
        if self.ensembles < 1:
            raise ValueError("ensembles must be >= 1")
        if not 0 <= self.dither < 0.1:
            raise ValueError(f"dither must lie in [0, 0.1), got {self.dither}")


@dataclass(frozen=True)
class AnalyticDecomposition:
    wrapped_phase: np.ndarray
    unwrapped_phase: np.ndarray
    envelope: np.ndarray
    degenerate: bool = False


def design_bandpass(spec: FilterSpec) -> FilterCoefficients:
    """Butterworth band-pass of ``spec.order`` in second-order sections.

    The -3 dB points of a single pass sit exactly on ``f_lo`` and ``f_hi``.
    """
    sos = sps.butter(spec.order, [spec.f_lo, spec.f_hi], btype="bandpass", output="sos", fs=spec.fs)
    return FilterCoefficients(sos=sos, spec=spec)


def zero_phase_filter(x, coeffs: FilterCoefficients) -> np.ndarray:
    """Forward-backward filtering along the last axis with odd-reflection padding.

    The steady-state initial conditions of forward-backward filtering depend on
    which end is filtered first, so the result is averaged with the filtered
    time-reversed signal. That makes the operator exactly reversal-equivariant.
    """
    x = np.asarray(x, dtype=float)
    t = x.shape[-1]
    nstate = 2 * coeffs.sos.shape[0]
    if t < 3 * nstate:
        raise ValueError(f"signal of length {t} too short; need at least {3 * nstate} samples")
    padlen = min(t - 1, coeffs.spec.padlen)
    fwd = sps.sosfiltfilt(coeffs.sos, x, axis=-1, padtype="odd", padlen=padlen)
    rev = sps.sosfiltfilt(coeffs.sos, x[..., ::-1], axis=-1, padtype="odd", padlen=padlen)
    return 0.5 * (fwd + rev[..., ::-1])


def analytic_signal(x) -> np.ndarray:
    """DFT-based analytic signal along the last axis."""
    x = np.asarray(x, dtype=float)
    t = x.shape[-1]
    if t < 2:
        raise ValueError("analytic signal needs at least 2 samples")
    spectrum = np.fft.fft(x, axis=-1)
    gain = np.zeros(t)
    gain[0] = 1.0
    half = t // 2
    if t % 2 == 0:
        gain[1:half] = 2.0
        gain[half] = 1.0
    else:
        gain[1 : half + 1] = 2.0
    z = np.fft.ifft(spectrum * gain, axis=-1)
    # the real part is x by construction; drop the ifft round-off in it
    return x + 1j * z.imag


def instantaneous_phase(z) -> np.ndarray:
    """Four-quadrant angle in (-pi, pi]; exactly-zero samples get angle 0."""
    z = np.asarray(z, dtype=complex)
    phase = np.arctan2(z.imag, z.real)
    phase[phase == -np.pi] = np.pi
    zero = z == 0
    if np.any(zero):
        phase[zero] = 0.0
        warnings.warn(
            f"{int(zero.sum())} zero-valued analytic sample(s); phase set to 0",
            DegenerateSampleWarning,
            stacklevel=2,
        )
    return phase


def wrap_phase(phase) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phase, dtype=float), TWO_PI)


def unwrap_phase(wrapped) -> np.ndarray:
    """Remove 2*pi jumps along the last axis.

    Each successive difference is shifted by the multiple of 2*pi that brings
    it into (-pi, pi]; the first sample is kept.
    """
    wrapped = np.asarray(wrapped, dtype=float)
    d = np.diff(wrapped, axis=-1)
    steps = np.round((d - wrap_phase(d)) / TWO_PI)
    correction = np.cumsum(steps, axis=-1)
    out = wrapped.copy()
    out[..., 1:] -= TWO_PI * correction
    return out


def instantaneous_envelope(z) -> np.ndarray:
    return np.abs(np.asarray(z, dtype=complex))


def _ensemble_rng(seed: int, member: int) -> np.random.Generator:
    # keyed by member index so ensembles can be evaluated in any order
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, member])


def _dithered_spec(spec: FilterSpec, dither: float, rng: np.random.Generator) -> FilterSpec:
    if dither == 0:
        return spec
    for _ in range(MAX_DITHER_RETRIES):
        u_lo, u_hi = rng.uniform(-dither, dither, size=2)
        f_lo, f_hi = spec.f_lo * (1 + u_lo), spec.f_hi * (1 + u_hi)
        if 0 < f_lo < f_hi < spec.fs / 2:
            return FilterSpec(f_lo, f_hi, spec.order, spec.fs)
    raise ValueError(
        f"could not draw a valid dithered band within {MAX_DITHER_RETRIES} retries for {spec}"
    )


def _input_dither(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    power = np.mean(x**2, axis=-1, keepdims=True)
    scale = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + scale * rng.standard_normal(x.shape)


def _single_chain(x: np.ndarray, spec: FilterSpec) -> np.ndarray:
    return analytic_signal(zero_phase_filter(x, design_bandpass(spec)))


def _decompose(z: np.ndarray) -> AnalyticDecomposition:
    wrapped = instantaneous_phase(z)
    return AnalyticDecomposition(
        wrapped_phase=wrapped,
        unwrapped_phase=unwrap_phase(wrapped),
        envelope=instantaneous_envelope(z),
        degenerate=bool(np.any(z == 0)),
    )


def tfp_estimate(x, spec: FilterSpec, cfg: TfpConfig = TfpConfig()) -> AnalyticDecomposition:
    """Ensemble-averaged instantaneous phase and envelope.

    ``x`` may be a single signal or a stack of signals (last axis is time);
    all rows see the same dithered filters.
    """
    x = np.asarray(x, dtype=float)
    if cfg.dither == 0 and cfg.input_dither_snr_db is None:
        # every ensemble member would be identical
        return _decompose(_single_chain(x, spec))

    envelope_sum = np.zeros(x.shape)
    phasor_sum = np.zeros(x.shape, dtype=complex)
    degenerate = False
    for m in range(cfg.ensembles):
        rng = _ensemble_rng(cfg.seed, m)
        member_spec = _dithered_spec(spec, cfg.dither, rng)
        xm = x if cfg.input_dither_snr_db is None else _input_dither(x, cfg.input_dither_snr_db, rng)
        z = _single_chain(xm, member_spec)
        env = instantaneous_envelope(z)
        envelope_sum += env
        zero = env == 0
        degenerate |= bool(np.any(zero))
        phasor_sum += np.where(zero, 1.0, z / np.where(zero, 1.0, env))

    envelope = envelope_sum / cfg.ensembles
    mean_phasor = phasor_sum / cfg.ensembles
    wrapped = instantaneous_phase(mean_phasor)
    return AnalyticDecomposition(
        wrapped_phase=wrapped,
        unwrapped_phase=unwrap_phase(wrapped),
        envelope=envelope,
        degenerate=degenerate or bool(np.any(mean_phasor == 0)),
    )

