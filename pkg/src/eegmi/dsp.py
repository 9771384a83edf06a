"""Signal processing: Butterworth IIR design/filtering, FFT, Welch PSD, band features.

All numerics are implemented here from first principles (no scipy.signal):
the FFT is a recursive Cooley-Tukey, the Butterworth design goes through
the analog prototype + bilinear transform, and filtering runs as a cascade
of direct-form-II-transposed second-order sections.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, DataError
from .kernels import sosfilt as _sosfilt_kernel

EEGMMI_SAMPLE_RATE = 160.0
DEFAULT_SEGMENT_LEN = 24
DEFAULT_NFFT = 96
ALPHA_BAND = (8.0, 12.0)


# ---------------------------------------------------------------------------
# Windowing

def hann_window(n):
    """Hann taper w[k] = 0.5*(1 - cos(2*pi*k/(n-1))).

    Endpoints are exactly zero and the window is exactly symmetric
    (computed over one half and mirrored).
    """
    if n < 2:
        raise ArgumentError(f"hann_window needs n >= 2, got {n}")
    w = np.empty(n, dtype=np.float64)
    half = (n + 1) // 2
    k = np.arange(half, dtype=np.float64)
    w[:half] = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))
    w[n - half:] = w[:half][::-1]
    w[0] = 0.0
    w[n - 1] = 0.0
    return w


# ---------------------------------------------------------------------------
# FFT

@lru_cache(maxsize=64)
def _dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)

@lru_cache(maxsize=64)
def _twiddles(n):
    return np.exp(-2j * np.pi * np.arange(n // 2) / n)


def _fft_core(a):
    """Cooley-Tukey along the last axis; direct DFT at small/odd base cases."""
    n = a.shape[-1]
    if n <= 8 or n % 2:
        return a @ _dft_matrix(n).T
    even = _fft_core(a[..., 0::2])
    odd = _fft_core(a[..., 1::2]) * _twiddles(n)
    return np.concatenate((even + odd, even - odd), axis=-1)


def fft(x, nfft=None):
    """DFT of a real or complex series, zero-padded to nfft.

    X[k] = sum_n x[n] * exp(-2j*pi*k*n/nfft).  Any nfft >= len(x) is
    accepted; highly composite sizes (powers of two, 96, ...) run in
    O(n log n), odd factors fall back to the direct transform.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ArgumentError(f"fft expects a 1-D series, got shape {x.shape}")
    if nfft is None:
        nfft = x.shape[0]
    if nfft < 1 or nfft < x.shape[0]:
        raise ArgumentError(f"nfft={nfft} unsupported for input length {x.shape[0]}")
    padded = np.zeros(nfft, dtype=np.complex128)
    padded[: x.shape[0]] = x
    return _fft_core(padded)


def _fft_segments(segments, nfft):
    """Batched transform of stacked segments (rows), zero-padded to nfft."""
    m, seg_len = segments.shape
    padded = np.zeros((m, nfft), dtype=np.complex128)
    padded[:, :seg_len] = segments
    return _fft_core(padded)


# ---------------------------------------------------------------------------
# Butterworth design

@dataclass
class IirFilter:
    b: np.ndarray          # feed-forward, length order+1
    a: np.ndarray          # feedback, length order+1, a[0] = 1
    sos: np.ndarray        # cascade [n_sections, 6] of (b0,b1,b2,a0,a1,a2)
    order: int
    cutoff_hz: float
    sample_rate: float
    kind: str              # "high" | "low"

    def poles(self):
        return np.roots(self.a)

    def response(self, freqs_hz):
        """Complex frequency response H(e^{j*2*pi*f/fs}) at the given frequencies."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate
        z = np.exp(-1j * w)
        num = np.polyval(self.b[::-1], z)
        den = np.polyval(self.a[::-1], z)
        return num / den


def design_butterworth(order, cutoff_hz, sample_rate, kind):
    """Butterworth IIR design via analog prototype + prewarped bilinear transform."""
    if kind not in ("high", "low"):
        raise ArgumentError(f"kind must be 'high' or 'low', got {kind!r}")
    if order < 1:
        raise ArgumentError(f"order must be >= 1, got {order}")
    nyquist = sample_rate / 2.0
    if not 0.0 < cutoff_hz < nyquist:
        raise ArgumentError(
            f"cutoff {cutoff_hz} Hz outside (0, {nyquist}) at fs={sample_rate}"
        )

    # Analog prototype poles on the unit circle, left half plane.
    k = np.arange(order)
    proto = np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))

    warped = 2.0 * sample_rate * np.tan(np.pi * cutoff_hz / sample_rate)
    if kind == "low":
        analog_poles = warped * proto
        analog_zeros = np.empty(0, dtype=np.complex128)
        analog_gain = warped**order
    else:
        analog_poles = warped / proto
        analog_zeros = np.zeros(order, dtype=np.complex128)
        analog_gain = 1.0

    fs2 = 2.0 * sample_rate
    digital_poles = (fs2 + analog_poles) / (fs2 - analog_poles)
    digital_zeros = (fs2 + analog_zeros) / (fs2 - analog_zeros)
    # Analog zeros at infinity land at z = -1.
    digital_zeros = np.concatenate(
        (digital_zeros, -np.ones(order - analog_zeros.size))
    )
    gain = analog_gain * np.real(
        np.prod(fs2 - analog_zeros) / np.prod(fs2 - analog_poles)
    )

    b = np.real(gain * np.poly(digital_zeros))
    a = np.real(np.poly(digital_poles))
    sos = _zpk_to_sos(digital_zeros, digital_poles, gain)
    return IirFilter(b=b, a=a, sos=sos, order=order, cutoff_hz=float(cutoff_hz),
                     sample_rate=float(sample_rate), kind=kind)


def _zpk_to_sos(zeros, poles, gain):
    """Pair conjugate poles into biquads; Butterworth zeros are all identical."""
    pairs = []
    reals = []
    seen = np.zeros(len(poles), dtype=bool)
    for i, p in enumerate(poles):
        if seen[i]:
            continue
        seen[i] = True
        if abs(p.imag) > 1e-12:
            # find the conjugate partner
            for j in range(i + 1, len(poles)):
                if not seen[j] and abs(poles[j] - np.conj(p)) < 1e-9:
                    seen[j] = True
                    break
            pairs.append(p)
        else:
            reals.append(p.real)

    z0 = zeros[0]  # all digital Butterworth zeros coincide (+1 or -1)
    sections = []
    for p in pairs:
        b = np.real(np.poly([z0, z0]))
        a = np.real(np.poly([p, np.conj(p)]))
        sections.append(np.concatenate((b, a)))
    for r in reals:
        sections.append(np.array([1.0, -z0.real, 0.0, 1.0, -r, 0.0]))
    sos = np.array(sections, dtype=np.float64)
    sos[0, :3] *= gain
    return sos


def filter_channel(filt, signal):
    """Causal filtering of one channel through the SOS cascade (DF2T)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ArgumentError("filter_channel expects a non-empty 1-D series")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite sample in filter input")
    return _sosfilt_kernel(filt.sos, x[np.newaxis, :])[0]


def filter_record(filt, samples):
    """Filter every channel of a [channel x time] matrix."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ArgumentError("filter_record expects a non-empty [channel x time] matrix")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite sample in filter input")
    return _sosfilt_kernel(filt.sos, x)


# ---------------------------------------------------------------------------
# Welch PSD and band features

@dataclass
class Psd:
    frequencies: np.ndarray
    power: np.ndarray
    resolution: float
    segment_count: int


def welch_psd(signal, segment_len=DEFAULT_SEGMENT_LEN, overlap_fraction=0.5,
              nfft=DEFAULT_NFFT, sample_rate=EEGMMI_SAMPLE_RATE):
    """Averaged one-sided periodogram over Hann-windowed, half-overlapping segments.

    Each segment is windowed, zero-padded to nfft, and scaled by
    1/(fs * sum(w^2)); interior bins are doubled for the one-sided form.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError(f"welch_psd expects a 1-D series, got shape {x.shape}")
    if segment_len < 2 or not 0.0 <= overlap_fraction < 1.0:
        raise ArgumentError("invalid segment_len/overlap_fraction")
    if nfft < segment_len:
        raise ArgumentError(f"nfft={nfft} shorter than segment_len={segment_len}")
    if x.shape[0] < segment_len:
        raise DataError(
            f"signal length {x.shape[0]} shorter than one segment ({segment_len})"
        )

    step = int(round(segment_len * (1.0 - overlap_fraction)))
    step = max(step, 1)
    n_segments = (x.shape[0] - segment_len) // step + 1
    window = hann_window(segment_len)
    scale = sample_rate * np.sum(window**2)

    starts = np.arange(n_segments) * step
    segments = np.stack([x[s:s + segment_len] for s in starts]) * window
    spectra = _fft_segments(segments, nfft)

    n_bins = nfft // 2 + 1
    periodograms = (np.abs(spectra[:, :n_bins]) ** 2) / scale
    periodograms[:, 1:n_bins - 1] *= 2.0
    if nfft % 2:
        periodograms[:, n_bins - 1] *= 2.0

    power = periodograms.mean(axis=0)
    freqs = np.arange(n_bins) * (sample_rate / nfft)
    return Psd(frequencies=freqs, power=power,
               resolution=sample_rate / nfft, segment_count=n_segments)


def alpha_band_features(psd, band=ALPHA_BAND):
    """Power at every bin whose center frequency lies inside [band_lo, band_hi]."""
    lo, hi = band
    if lo > hi:
        raise ArgumentError(f"band lower edge {lo} above upper edge {hi}")
    if lo > psd.frequencies[-1] or hi < psd.frequencies[0]:
        raise ArgumentError(
            f"band [{lo}, {hi}] Hz outside PSD range "
            f"[{psd.frequencies[0]}, {psd.frequencies[-1]}] Hz"
        )
    mask = (psd.frequencies >= lo) & (psd.frequencies <= hi)
    return psd.power[mask]


def band_bin_frequencies(band=ALPHA_BAND, nfft=DEFAULT_NFFT,
                         sample_rate=EEGMMI_SAMPLE_RATE):
    """Center frequencies of the bins that alpha_band_features selects."""
    freqs = np.arange(nfft // 2 + 1) * (sample_rate / nfft)
    lo, hi = band
    return freqs[(freqs >= lo) & (freqs <= hi)]


def epoch_to_features(data, sample_rate=EEGMMI_SAMPLE_RATE,
                      segment_len=DEFAULT_SEGMENT_LEN, nfft=DEFAULT_NFFT,
                      band=ALPHA_BAND):
    """Per-channel Welch PSD -> band power, concatenated channel-major."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ArgumentError(f"epoch data must be [channel x time], got {x.shape}")
    parts = []
    for ch in range(x.shape[0]):
        psd = welch_psd(x[ch], segment_len=segment_len, nfft=nfft,
                        sample_rate=sample_rate)
        parts.append(alpha_band_features(psd, band))
    return np.concatenate(parts)


def feature_names(n_channels, band=ALPHA_BAND, nfft=DEFAULT_NFFT,
                  sample_rate=EEGMMI_SAMPLE_RATE):
    """CSV column names ch{c}_f{freq} matching epoch_to_features layout."""
    freqs = band_bin_frequencies(band, nfft, sample_rate)
    return [f"ch{c}_f{f:.2f}" for c in range(n_channels) for f in freqs]
