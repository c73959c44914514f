import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgbench.dsp import apply_fir, design_fir_bandpass, downsample, upsample
from ecgbench.errors import EvenTaps, InvalidBand, NonIntegerFactor, SignalTooShort
from ecgbench.signal import EcgRecording


@pytest.fixture(scope="module")
def fir():
    return design_fir_bandpass(77, 3.0, 45.0, 256.0)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def test_reference_design(fir):
    assert fir.taps == 77 and fir.delay == 38
    assert abs(fir.coefficients.sum()) <= 0.01
    assert 0.95 <= fir.response(20.0)[0] <= 1.05


def test_sine_gain_matches_response(fir):
    t = np.arange(256 * 20) / 256
    inner = slice(100, -100)
    for f in (10.0, 50.0):
        y = apply_fir(np.sin(2 * np.pi * f * t), fir)
        ratio = rms(y[inner]) / rms(np.sin(2 * np.pi * f * t)[inner])
        assert ratio == pytest.approx(fir.response(f)[0], abs=0.01)
    assert 0.9 <= fir.response(10.0)[0] <= 1.1
    assert fir.response(50.0)[0] <= 0.2


def test_design_errors():
    with pytest.raises(InvalidBand):
        design_fir_bandpass(77, 45, 3, 256)
    with pytest.raises(InvalidBand):
        design_fir_bandpass(77, 3, 128, 256)
    with pytest.raises(EvenTaps):
        design_fir_bandpass(76, 3, 45, 256)


def test_zero_and_impulse(fir):
    assert not apply_fir(np.zeros(500), fir).any()
    x = np.zeros(301)
    x[150] = 1.0
    y = apply_fir(x, fir)
    assert np.allclose(y[150 - 38:150 + 39], fir.coefficients)
    assert np.allclose(np.delete(y, np.s_[112:189]), 0.0)


def test_short_signal(fir):
    with pytest.raises(SignalTooShort):
        apply_fir(np.zeros(76), fir)


def test_dc_rejection(fir):
    x = np.random.default_rng(0).normal(size=2000)
    diff = apply_fir(x + 1.0, fir) - apply_fir(x, fir)
    assert np.max(np.abs(diff[38:-38])) <= 0.01


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_linearity(seed, k):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 300))
    f = design_fir_bandpass()
    assert np.allclose(apply_fir(a + k * b, f), apply_fir(a, f) + k * apply_fir(b, f), atol=1e-9)


@given(st.sampled_from([11, 31, 77, 101]), st.floats(0.5, 20), st.floats(25, 100),
       st.sampled_from([256.0, 1024.0]))
def test_symmetric_and_odd(taps, lo, hi, fs):
    f = design_fir_bandpass(taps, lo, hi, fs)
    assert f.taps % 2 == 1
    assert np.max(np.abs(f.coefficients - f.coefficients[::-1])) <= 1e-12


def test_stopband_energy_of_white_noise(fir):
    x = np.random.default_rng(5).normal(size=256 * 600)
    y = apply_fir(x, fir)[38:-38]
    psd = np.abs(np.fft.rfft(y)) ** 2
    freqs = np.fft.rfftfreq(len(y), 1 / 256)
    stop = psd[(freqs < 1) | (freqs > 60)].sum()
    passband = psd[(freqs >= 3) & (freqs <= 45)].sum()
    assert stop <= 0.05 * passband


def recording(x, fs=1024, validity=None):
    return EcgRecording(np.asarray(x, dtype=float), fs, "S01", 1, 0.0, validity)


def test_downsample_length_and_constant():
    r = downsample(recording(np.full(4096, 0.7)), 256)
    assert len(r) == 1024 and r.sample_rate == 256
    assert np.allclose(r.samples[100:-100], 0.7, atol=1e-6)


def test_downsample_sines():
    t = np.arange(1024 * 8) / 1024
    inner = slice(200, -200)
    ok = downsample(recording(np.sin(2 * np.pi * 100 * t)), 256).samples
    assert rms(ok[inner]) / rms(np.sin(2 * np.pi * 100 * t)) == pytest.approx(1.0, abs=0.05)
    peak_bin = np.argmax(np.abs(np.fft.rfft(ok[inner] * np.hanning(len(ok[inner])))))
    assert np.fft.rfftfreq(len(ok[inner]), 1 / 256)[peak_bin] == pytest.approx(100, abs=0.5)
    alias = downsample(recording(np.sin(2 * np.pi * 300 * t)), 256).samples
    assert rms(alias[inner]) <= 0.05 * rms(np.sin(2 * np.pi * 300 * t))


def test_downsample_validity_and():
    mask = np.ones(64, dtype=bool)
    mask[5] = False
    mask[40:44] = False
    r = downsample(recording(np.zeros(64), validity=mask), 256)
    expected = np.ones(16, dtype=bool)
    expected[[1, 10]] = False
    assert np.array_equal(r.validity, expected)


def test_non_integer_factor():
    with pytest.raises(NonIntegerFactor):
        downsample(recording(np.zeros(1000), fs=1000), 256)


def test_down_up_reconstructs_band_limited():
    t = np.arange(1024 * 10) / 1024
    x = np.sin(2 * np.pi * 7 * t) + 0.5 * np.sin(2 * np.pi * 23 * t + 1) + 0.3 * np.sin(2 * np.pi * 41 * t)
    back = upsample(downsample(recording(x), 256), 1024).samples
    inner = slice(1024, -1024)
    assert rms(back[inner] - x[inner]) <= 0.02 * rms(x[inner])
