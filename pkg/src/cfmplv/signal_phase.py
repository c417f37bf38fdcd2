"""Band-pass filtering and analytic-signal phase extraction."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import firwin

from .errors import BandOutOfRange
from .phase_data import PhaseDataset, TimeGrid, wrap

# filter length in cycles of the lower band edge
FILTER_CYCLES = 10
BOUNDARY_FRACTION = 0.1


@dataclass(frozen=True)
class RawSignal:
    samples: np.ndarray   # (channel, time)
    fs: float

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "samples", samples)
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        if not np.isfinite(samples).all():
            raise ValueError("signal contains non-finite samples")


@dataclass(frozen=True)
class BandSpec:
    low: float
    high: float

    @classmethod
    def parse(cls, text):
        """Parse ``"low:high"`` in Hz."""
        lo, hi = text.split(":")
        return cls(float(lo), float(hi))

    def check(self, fs):
        if not 0 < self.low < self.high < fs / 2:
            raise BandOutOfRange(f"band {self.low}-{self.high} Hz invalid for fs={fs} Hz")


def design_bandpass(band, fs):
    """Odd-length Hamming windowed-sinc band-pass taps."""
    band.check(fs)
    order = int(round(FILTER_CYCLES * fs / band.low))
    order += order % 2
    return firwin(order + 1, [band.low, band.high], pass_zero=False, fs=fs, window="hamming")


def bandpass(signal, band):
    """Zero-phase band-pass: the FIR is applied forward then backward.

    Each channel is padded by one filter length of symmetric reflection so
    the output keeps the input length.
    """
    taps = design_bandpass(band, signal.fs)
    pad = taps.size
    x = np.pad(signal.samples, ((0, 0), (pad, pad)), mode="symmetric")
    out = np.empty_like(x)
    for c in range(x.shape[0]):
        y = np.convolve(x[c], taps, mode="same")
        out[c] = np.convolve(y[::-1], taps, mode="same")[::-1]
    return RawSignal(out[:, pad:-pad], signal.fs)


def analytic_signal(x):
    """FFT analytic signal along the last axis (negative frequencies zeroed)."""
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    h = np.zeros(N)
    if N % 2 == 0:
        h[0] = h[N // 2] = 1.0
        h[1:N // 2] = 2.0
    else:
        h[0] = 1.0
        h[1:(N + 1) // 2] = 2.0
    return np.fft.ifft(np.fft.fft(x, axis=-1) * h, axis=-1)


def hilbert_phase(signal):
    """Instantaneous phase in ``[0, 2*pi)``, shape ``(channel, time)``.

    A zero analytic signal gets phase 0 (``atan2(0, 0) = 0``).
    """
    if signal.samples.shape[-1] < 4:
        raise ValueError("need at least 4 samples for a Hilbert phase")
    z = analytic_signal(signal.samples)
    return wrap(np.arctan2(z.imag, z.real))


def extract(signal, band, take=None):
    """Band-pass, take the Hilbert phase and keep the first ``take`` samples.

    Returns a one-subject :class:`PhaseDataset`. ``meta["boundary"]`` gives
    how many samples at each end of the full-length phase track are affected
    by edge effects and should not be trusted.
    """
    phase = hilbert_phase(bandpass(signal, band))
    N = phase.shape[-1]
    if take is not None:
        if not 2 <= take <= N:
            raise ValueError(f"take must be in [2, {N}], got {take}")
        phase = phase[:, :take]
    meta = {"fs": signal.fs, "band": [band.low, band.high],
            "boundary": int(np.ceil(BOUNDARY_FRACTION * N)), "source_length": N}
    return PhaseDataset(phase[None], TimeGrid.uniform(phase.shape[-1]), meta)
