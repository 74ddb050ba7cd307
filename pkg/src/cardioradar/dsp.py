"""Numerical primitives shared by the radar and ECG pipelines.

All functions are pure: they never modify their inputs and return fresh
arrays, so independent windows/antennas can be processed in any order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import signal as _signal

from .errors import InvalidArgument

# Filter kinds used on the ECG. Cutoffs in Hz.
FILTER_KINDS = {
    "highpass": ("highpass", 0.05),
    "lowpass": ("lowpass", 75.0),
    "bandstop": ("bandstop", (45.0, 55.0)),
}
FILTER_ORDER = 4


@dataclass(frozen=True)
class ComplexSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidArgument("sample_rate must be positive")
        if len(self.samples) < 1:
            raise InvalidArgument("series must contain at least one sample")


@dataclass(frozen=True)
class Spectrogram:
    """Power grid ``[time step, frequency bin]`` with a centred frequency axis.

    Bin ``j`` holds frequency ``(j - n_bins // 2) * bin_hz``. Time step ``m``
    corresponds to the window whose centre lies at ``t0 + m * step_s``.
    """

    power: np.ndarray
    bin_hz: float
    step_s: float
    t0: float = 0.0

    @property
    def n_bins(self) -> int:
        return self.power.shape[1]

    @property
    def freqs(self) -> np.ndarray:
        return (np.arange(self.n_bins) - self.n_bins // 2) * self.bin_hz

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.power.shape[0]) * self.step_s


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window ``0.5 * (1 - cos(2 pi k / (n - 1)))``."""
    if n < 1:
        raise InvalidArgument(f"window length must be >= 1, got {n}")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))
    # exact symmetry; cos rounding differs slightly between k and n-1-k
    return 0.5 * (w + w[::-1])


def fft(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        raise InvalidArgument("cannot transform an empty sequence")
    return np.fft.fft(x)


def ifft(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.size == 0:
        raise InvalidArgument("cannot transform an empty sequence")
    return np.fft.ifft(X)


def stft(x: ComplexSeries, window_size: int = 65, n_bins: int = 8192,
         step: int = 1) -> Spectrogram:
    """Hann-windowed short-time power spectrum.

    Each window ``x[m*step : m*step + window_size]`` is weighted, zero-padded
    to ``n_bins`` and transformed; the squared modulus is stored with the
    zero-frequency bin moved to the centre. This materialises the full grid;
    long captures should go through
    :func:`cardioradar.radar.extract_velocity_argmax`, which streams.
    """
    s = np.asarray(x.samples, dtype=complex)
    if window_size < 1 or window_size > len(s):
        raise InvalidArgument(
            f"window_size {window_size} must be in [1, {len(s)}]")
    if n_bins < window_size:
        raise InvalidArgument("n_bins must be >= window_size")
    if step < 1:
        raise InvalidArgument("step must be >= 1")
    w = hann_window(window_size)
    frames = np.lib.stride_tricks.sliding_window_view(s, window_size)[::step]
    X = np.fft.fft(frames * w, n=n_bins, axis=1)
    power = np.fft.fftshift(X.real ** 2 + X.imag ** 2, axes=1)
    return Spectrogram(power=power, bin_hz=x.sample_rate / n_bins,
                       step_s=step / x.sample_rate,
                       t0=(window_size - 1) / 2 / x.sample_rate)


def moving_average(x, window: int, order: int = 1) -> np.ndarray:
    """Centred moving average applied ``order`` times.

    Near the edges the window shrinks symmetrically, so sample ``i`` is the
    mean of ``x[i-h : i+h+1]`` with ``h = min(window // 2, i, n - 1 - i)``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if window < 1 or window % 2 == 0:
        raise InvalidArgument(f"window must be a positive odd integer, got {window}")
    if window > n:
        raise InvalidArgument(f"window {window} longer than series ({n})")
    if order < 1:
        raise InvalidArgument("order must be >= 1")
    i = np.arange(n)
    half = np.minimum(window // 2, np.minimum(i, n - 1 - i))
    lo, hi = i - half, i + half + 1
    y = x
    for _ in range(order):
        c = np.concatenate(([0.0], np.cumsum(y)))
        y = (c[hi] - c[lo]) / (hi - lo)
    return y


def _design(kind: str, sample_rate: float) -> np.ndarray:
    try:
        btype, cutoff = FILTER_KINDS[kind]
    except KeyError:
        raise InvalidArgument(f"unknown filter kind {kind!r}") from None
    nyq = sample_rate / 2
    if np.max(cutoff) >= nyq:
        raise InvalidArgument(
            f"cutoff {cutoff} Hz is not below Nyquist ({nyq} Hz)")
    return _signal.butter(FILTER_ORDER, cutoff, btype=btype, fs=sample_rate,
                          output="sos")


def zero_phase_filter(x, kind: str, sample_rate: float) -> np.ndarray:
    """Forward-backward Butterworth filter of one of :data:`FILTER_KINDS`."""
    sos = _design(kind, sample_rate)
    x = np.asarray(x, dtype=float)
    return _signal.sosfiltfilt(sos, x)


def integrate(v, sample_rate: float) -> np.ndarray:
    """Cumulative trapezoidal integral starting at zero."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise InvalidArgument("cannot integrate an empty series")
    return _integrate.cumulative_trapezoid(v, dx=1.0 / sample_rate, initial=0.0)


def differentiate(x, sample_rate: float) -> np.ndarray:
    """Central differences inside, one-sided differences at the two ends."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InvalidArgument("need at least two samples to differentiate")
    return np.gradient(x, 1.0 / sample_rate)
