import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.signal import hilbert

from cfmplv.errors import BandOutOfRange
from cfmplv.phase_data import TWO_PI
from cfmplv.signal_phase import (
    BandSpec, RawSignal, analytic_signal, bandpass, design_bandpass, extract, hilbert_phase,
)

FS = 250.0
BAND = BandSpec(8.0, 12.0)


def _tone(freq, seconds=8.0, amp=1.0):
    t = np.arange(int(seconds * FS)) / FS
    return RawSignal(amp * np.sin(TWO_PI * freq * t), FS)


def _interior_power(x):
    n = x.shape[-1]
    core = x[..., n // 4: 3 * n // 4]
    return np.mean(core ** 2)


def test_passband_tone_kept():
    sig = _tone(10.0)
    ratio = _interior_power(bandpass(sig, BAND).samples) / _interior_power(sig.samples)
    assert ratio == pytest.approx(1.0, abs=0.05)


def test_stopband_tone_removed():
    sig = _tone(40.0)
    ratio = _interior_power(bandpass(sig, BAND).samples) / _interior_power(sig.samples)
    assert ratio < 1e-3


def test_constant_input_removed():
    sig = RawSignal(np.full((1, 2000), 3.0), FS)
    assert np.abs(bandpass(sig, BAND).samples).max() < 1e-2


def test_filter_is_zero_phase():
    sig = _tone(10.0)
    out = bandpass(sig, BAND).samples[0]
    n = out.size
    core = slice(n // 4, 3 * n // 4)
    lag = np.argmax(np.correlate(out[core], sig.samples[0][core], mode="full")) - (n // 2 - 1)
    assert lag == 0


def test_taps_odd_symmetric():
    taps = design_bandpass(BAND, FS)
    assert taps.size % 2 == 1
    assert_allclose(taps, taps[::-1], atol=1e-15)


@pytest.mark.parametrize("band", [BandSpec(0.0, 10.0), BandSpec(10.0, 5.0), BandSpec(8.0, 130.0)])
def test_band_out_of_range(band):
    with pytest.raises(BandOutOfRange):
        design_bandpass(band, FS)


def test_band_parse():
    assert BandSpec.parse("8:12") == BAND


def test_phase_of_cosine_is_linear():
    N, f0 = 512, 16
    t = np.arange(N)
    x = np.cos(TWO_PI * f0 * t / N)
    ph = hilbert_phase(RawSignal(x, 1.0))[0]
    expected = np.mod(TWO_PI * f0 * t / N, TWO_PI)
    d = np.angle(np.exp(1j * (ph - expected)))
    assert np.abs(d).max() < 1e-10


def test_sine_lags_cosine_by_quarter_turn():
    N, f0 = 400, 10
    t = np.arange(N)
    c = hilbert_phase(RawSignal(np.cos(TWO_PI * f0 * t / N), 1.0))[0]
    s = hilbert_phase(RawSignal(np.sin(TWO_PI * f0 * t / N), 1.0))[0]
    d = np.angle(np.exp(1j * (c - s)))
    assert_allclose(d, np.pi / 2, atol=1e-10)


def test_zero_signal_phase_zero():
    ph = hilbert_phase(RawSignal(np.zeros(16), 1.0))
    assert np.all(ph == 0.0)


def test_too_short_signal():
    with pytest.raises(ValueError):
        hilbert_phase(RawSignal(np.ones(3), 1.0))


@pytest.mark.parametrize("N", [64, 65])
def test_analytic_signal_one_sided_and_matches_scipy(rng, N):
    x = rng.standard_normal((3, N))
    z = analytic_signal(x)
    assert_allclose(z.real, x, atol=1e-12)
    spec = np.fft.fft(z, axis=-1)
    neg = np.arange(N // 2 + 1, N)
    assert np.abs(spec[:, neg]).max() < 1e-9
    assert_allclose(z, hilbert(x, axis=-1), atol=1e-12)


def test_analytic_signal_linear(rng):
    x, y = rng.standard_normal((2, 300))
    assert_allclose(analytic_signal(2.5 * x - 0.7 * y),
                    2.5 * analytic_signal(x) - 0.7 * analytic_signal(y), atol=1e-10)


def test_extract_dataset():
    t = np.arange(2000) / FS
    sig = RawSignal(np.vstack([np.sin(TWO_PI * 10 * t), np.sin(TWO_PI * 10 * t + 1.0)]), FS)
    d = extract(sig, BAND, take=500)
    assert d.values.shape == (1, 2, 500)
    assert np.all((d.values >= 0) & (d.values < TWO_PI))
    assert d.meta["boundary"] == 200 and d.meta["source_length"] == 2000
    diff = np.angle(np.exp(1j * (d.values[0, 1] - d.values[0, 0])))[200:300]
    assert_allclose(diff, 1.0, atol=0.02)
    with pytest.raises(ValueError):
        extract(sig, BAND, take=1)
