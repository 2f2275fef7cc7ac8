import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp
from scipy import signal as sps
from scipy.special import i0e, i1e

from phasefeat.features import (
    CoherencyMatrix,
    EntropyConfig,
    FeatureLayout,
    FeatureSetId,
    WelchConfig,
    entropy_feature,
    extract_subject_features,
    msc_matrix,
    plv_matrix,
    power_feature,
    welch_cross_spectra,
    write_matrix_csv,
)
from phasefeat.ingest import RoiTimeSeries
from phasefeat.sigproc import FilterSpec, TfpConfig

WIDE = WelchConfig(segment_length=512, overlap_fraction=0.0, band=(0.01, 0.49))


def assert_coherency(m: CoherencyMatrix):
    v = m.values
    np.testing.assert_array_equal(v, v.T)
    np.testing.assert_array_equal(np.diag(v), 1.0)
    assert np.all((v >= 0) & (v <= 1))


# --- power and entropy -------------------------------------------------------


def test_power_examples():
    assert power_feature([1, 2, 3]) == 14
    assert power_feature(np.zeros(40)) == 0
    t = np.arange(64)
    assert power_feature(np.abs(np.exp(2j * np.pi * 3 * t / 64))) == pytest.approx(64, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 100), elements=st.floats(-1e3, 1e3)), st.floats(-10, 10))
def test_power_homogeneous(x, c):
    assert power_feature(c * x) == pytest.approx(c * c * power_feature(x), rel=1e-9, abs=1e-9)


def test_entropy_examples():
    assert entropy_feature(np.full(50, 3.3)) == 0.0
    assert entropy_feature(np.arange(16.0), bins=16, log_base=2) == pytest.approx(4.0)
    assert entropy_feature([0, 0, 0, 1, 1, 1], bins=16, log_base=2) == pytest.approx(1.0)


def test_entropy_last_bin_right_closed():
    # the max lands in the last bin rather than falling off the edge
    assert entropy_feature([0.0, 1.0], bins=2) == pytest.approx(1.0)


def test_entropy_natural_log_base():
    assert entropy_feature([0, 1], bins=4, log_base=np.e) == pytest.approx(np.log(2))


def test_entropy_rejects_one_bin():
    with pytest.raises(ValueError):
        entropy_feature([1.0, 2.0], bins=1)


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, st.integers(2, 80), elements=st.integers(-50, 50).map(float)),
    st.sampled_from([0.5, 2.0, 4.0]),
    st.integers(-100, 100).map(float),
)
def test_entropy_affine_invariant(x, a, b):
    # integer data and dyadic slopes keep the bin assignment exact
    assert entropy_feature(a * x + b) == pytest.approx(entropy_feature(x), abs=1e-12)


# --- PLV ---------------------------------------------------------------------


def test_plv_constant_offset():
    rng = np.random.default_rng(0)
    p = np.cumsum(rng.standard_normal(200))
    m = plv_matrix(np.stack([p, p + 1.234, p - 7.0]))
    assert np.abs(m.values - 1).max() <= 1e-12


def test_plv_root_of_unity():
    t = 140
    w = 2 * np.pi * 3 / t
    n = np.arange(t)
    m = plv_matrix(np.stack([w * n, 2 * w * n]))
    assert m.values[0, 1] <= 1e-12


def test_plv_von_mises_oracle():
    kappa = 2.0
    oracle = i1e(kappa) / i0e(kappa)
    assert oracle == pytest.approx(0.698, abs=1e-3)
    rng = np.random.default_rng(1)
    base = rng.uniform(-np.pi, np.pi, 10_000)
    m = plv_matrix(np.stack([base, base + rng.vonmises(0.0, kappa, 10_000)]))
    assert abs(m.values[0, 1] - oracle) < 0.03


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(8, 60), st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_plv_invariants(n, t, seed, shift):
    p = np.random.default_rng(seed).uniform(-20, 20, (n, t))
    m = plv_matrix(p)
    assert_coherency(m)
    np.testing.assert_allclose(plv_matrix(p + shift).values, m.values, atol=1e-12)


def test_plv_rejects_single_row():
    with pytest.raises(ValueError):
        plv_matrix(np.zeros((1, 10)))


# --- MSC ---------------------------------------------------------------------


def test_msc_self_coherence():
    x = np.random.default_rng(2).standard_normal(300)
    m = msc_matrix(np.stack([x, x, 2 * x]), 1 / 3, WelchConfig(band=(0.01, 0.1)))
    np.testing.assert_allclose(m.values, 1.0, atol=1e-12)


def test_msc_white_noise_bias():
    rng = np.random.default_rng(3)
    vals = [msc_matrix(rng.standard_normal((2, 4096)), 1.0, WIDE).values[0, 1] for _ in range(100)]
    assert WIDE.n_segments(4096) == 8
    assert abs(np.mean(vals) - 1 / 8) < 0.05


def test_msc_matches_scipy_coherence():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 4096))
    x[1] += 0.7 * x[0]
    cfg = WelchConfig(segment_length=256, overlap_fraction=0.5, band=(0.05, 0.3))
    f, c = sps.coherence(x[0], x[1], fs=1.0, window="hann", nperseg=256, noverlap=128, detrend="constant")
    band = (f >= 0.05) & (f <= 0.3)
    assert msc_matrix(x, 1.0, cfg).values[0, 1] == pytest.approx(c[band].mean(), rel=1e-10)
    cmax = WelchConfig(segment_length=256, overlap_fraction=0.5, band=(0.05, 0.3), reduce="max")
    assert msc_matrix(x, 1.0, cmax).values[0, 1] == pytest.approx(c[band].max(), rel=1e-10)


def test_msc_delayed_copy():
    rng = np.random.default_rng(5)
    sos = sps.butter(4, [0.05, 0.2], btype="bandpass", output="sos", fs=1.0)
    x = sps.sosfilt(sos, rng.standard_normal(4200))[100:]
    y = np.roll(x, 3)
    m = msc_matrix(np.stack([x, y]), 1.0, WelchConfig(segment_length=256, band=(0.06, 0.18)))
    assert m.values[0, 1] > 0.95


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_msc_invariants_and_scale(n, seed, scale):
    x = np.abs(np.random.default_rng(seed).standard_normal((n, 160))) + 0.1
    cfg = WelchConfig(band=(0.01, 0.1))
    m = msc_matrix(x, 1 / 3, cfg)
    assert_coherency(m)
    y = x.copy()
    y[0] *= scale
    np.testing.assert_allclose(msc_matrix(y, 1 / 3, cfg).values, m.values, atol=1e-10)


def test_msc_zero_power_pair_is_zero():
    x = np.random.default_rng(6).standard_normal((2, 200))
    x[1] = 4.0  # constant, zero power once the segment mean is removed
    assert msc_matrix(x, 1 / 3).values[0, 1] == 0.0


def test_msc_needs_two_segments():
    with pytest.raises(ValueError, match="need >= 2"):
        msc_matrix(np.ones((2, 100)), 1 / 3, WelchConfig(segment_length=64, overlap_fraction=0.0))


def test_welch_default_segments_at_140():
    assert WelchConfig().n_segments(140) == 3
    f, s = welch_cross_spectra(np.random.default_rng(0).standard_normal((3, 140)), 1 / 3, WelchConfig())
    assert s.shape == (3, 3, 33) and f.size == 33


@pytest.mark.parametrize(
    "kw", [dict(segment_length=4), dict(overlap_fraction=1.0), dict(window="tukey"), dict(reduce="median")]
)
def test_welch_config_rejects(kw):
    with pytest.raises(ValueError):
        WelchConfig(**kw)


# --- layout and extraction ---------------------------------------------------


def test_layout_112_regions():
    lay = FeatureLayout(112)
    assert lay.length == 12_880
    sizes = [len(lay.ranges[fs]) for fs in FeatureSetId]
    assert sizes == [112, 112, 112, 112, 6216, 6216]
    assert len(FeatureSetId) == 6


@given(st.integers(2, 40))
def test_layout_contiguous_cover(n):
    lay = FeatureLayout(n)
    cover = np.concatenate([np.arange(r.start, r.stop) for r in lay.ranges.values()])
    np.testing.assert_array_equal(cover, np.arange(lay.length))
    assert lay.length == 4 * n + n * (n - 1)
    assert len(lay.labels()) == lay.length
    np.testing.assert_array_equal(lay.indices(FeatureSetId), np.arange(lay.length))


def test_layout_indices_subset():
    lay = FeatureLayout(3)
    np.testing.assert_array_equal(lay.indices([FeatureSetId.MSC, FeatureSetId.IPPow]), [0, 1, 2, 15, 16, 17])


def _series(n=2, t=140, seed=0):
    return RoiTimeSeries("s0", np.random.default_rng(seed).standard_normal((n, t)))


def test_extract_two_regions():
    sf = extract_subject_features(_series(), FilterSpec(), TfpConfig(ensembles=4))
    assert sf.vector.shape == (10,)
    assert sf.layout.labels()[-1] == "MSC:r0|r1"
    assert sf.get(FeatureSetId.PLV)[0] == sf.plv.values[0, 1]
    assert sf.get(FeatureSetId.MSC)[0] == sf.msc.values[0, 1]
    assert np.all(np.isfinite(sf.vector))


def test_extract_deterministic():
    ts = _series(4)
    cfg = TfpConfig(ensembles=8, seed=42)
    a = extract_subject_features(ts, FilterSpec(), cfg)
    b = extract_subject_features(ts, FilterSpec(), cfg)
    np.testing.assert_array_equal(a.vector, b.vector)


def test_extract_ip_form():
    ts = _series(3)
    cfg = TfpConfig(ensembles=1, dither=0.0)
    un = extract_subject_features(ts, FilterSpec(), cfg)
    wr = extract_subject_features(ts, FilterSpec(), cfg, ip_form="wrapped")
    # wrapped phase is bounded so its energy cannot exceed T * pi^2
    assert np.all(wr.get(FeatureSetId.IPPow) <= 140 * np.pi**2)
    np.testing.assert_array_equal(un.get(FeatureSetId.IEPow), wr.get(FeatureSetId.IEPow))
    np.testing.assert_array_equal(un.get(FeatureSetId.PLV), wr.get(FeatureSetId.PLV))
    with pytest.raises(ValueError):
        extract_subject_features(ts, FilterSpec(), cfg, ip_form="both")


def test_extract_error_has_subject_context():
    ts = RoiTimeSeries("short", np.random.default_rng(0).standard_normal((2, 70)))
    with pytest.raises(ValueError, match="short"):
        extract_subject_features(ts, FilterSpec(), TfpConfig(ensembles=2), EntropyConfig(), WelchConfig())


def test_matrix_csv_round_trip(tmp_path):
    m = plv_matrix(np.random.default_rng(0).uniform(-3, 3, (4, 50)))
    write_matrix_csv(m, tmp_path / "m.csv")
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "m.csv", delimiter=","), m.values)
