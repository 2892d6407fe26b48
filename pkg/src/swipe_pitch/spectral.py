"""Windowed FFT analysis and auditory frequency grids.

Spectra are taken with a periodic Hann window, zero-padded to a shared FFT
length, and linearly interpolated onto a grid of sampling frequencies that is
equally spaced on the Slaney mel scale or on the ERB-rate scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .audio_io import AudioBuffer

__all__ = [
    "FrequencyGrid",
    "SampledSpectrum",
    "mel_slaney",
    "mel_slaney_inv",
    "erb_scale",
    "erb_scale_inv",
    "build_grid",
    "hann",
    "magnitude_spectrum",
    "frame_spectra",
    "windowed_spectrum",
]

Scale = Literal["mel_slaney", "erb"]

_MEL_BREAK_HZ = 1000.0
_MEL_BREAK = 15.0  # 3 * 1000 / 200
_MEL_LOGSTEP = np.log(6.4) / 27.0


def mel_slaney(f):
    """Hz to Slaney mel: linear (3f/200) below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    lin = 3.0 * f / 200.0
    with np.errstate(divide="ignore"):
        log = _MEL_BREAK + np.log(np.maximum(f, 1e-300) / _MEL_BREAK_HZ) / _MEL_LOGSTEP
    out = np.where(f >= _MEL_BREAK_HZ, log, lin)
    return out if out.ndim else float(out)


def mel_slaney_inv(m):
    m = np.asarray(m, dtype=np.float64)
    out = np.where(m >= _MEL_BREAK,
                   _MEL_BREAK_HZ * np.exp(_MEL_LOGSTEP * (m - _MEL_BREAK)),
                   200.0 * m / 3.0)
    return out if out.ndim else float(out)


def erb_scale(f):
    """Hz to ERB-rate (Glasberg & Moore): 21.4 log10(1 + 0.00437 f)."""
    out = 21.4 * np.log10(1.0 + 0.00437 * np.asarray(f, dtype=np.float64))
    return out if out.ndim else float(out)


def erb_scale_inv(e):
    out = (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 0.00437
    return out if out.ndim else float(out)


_SCALES = {
    "mel_slaney": (mel_slaney, mel_slaney_inv),
    "erb": (erb_scale, erb_scale_inv),
}


@dataclass(frozen=True)
class FrequencyGrid:
    """Sampling frequencies (Hz) equally spaced on an auditory scale."""

    freqs: np.ndarray
    scale: str
    f_lo: float
    f_hi: float

    def __len__(self) -> int:
        return len(self.freqs)

    def same_as(self, other: "FrequencyGrid") -> bool:
        return self is other or (
            self.scale == other.scale and len(self) == len(other)
            and np.array_equal(self.freqs, other.freqs))


@dataclass(frozen=True)
class SampledSpectrum:
    """Magnitude spectrum evaluated on a :class:`FrequencyGrid`."""

    grid: FrequencyGrid
    mag: np.ndarray


def build_grid(scale: Scale, f_lo: float, f_hi: float, n: int = 1024) -> FrequencyGrid:
    if not 0 < f_lo < f_hi:
        raise ValueError(f"need 0 < f_lo < f_hi, got {f_lo}, {f_hi}")
    if n < 2:
        raise ValueError("a grid needs at least two points")
    try:
        fwd, inv = _SCALES[scale]
    except KeyError:
        raise ValueError(f"unknown scale {scale!r}; choose from {sorted(_SCALES)}") from None
    freqs = inv(np.linspace(fwd(f_lo), fwd(f_hi), n))
    freqs[0], freqs[-1] = f_lo, f_hi
    freqs.setflags(write=False)
    return FrequencyGrid(freqs, scale, float(f_lo), float(f_hi))


def hann(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def _check_fft_len(window_len: int, fft_len: int) -> None:
    if fft_len < 1 or fft_len & (fft_len - 1):
        raise ValueError(f"fft_len must be a power of two, got {fft_len}")
    if not 1 <= window_len <= fft_len:
        raise ValueError(f"window_len must be in [1, fft_len={fft_len}], got {window_len}")


def magnitude_spectrum(frames: np.ndarray, fft_len: int) -> np.ndarray:
    """|DFT| of the zero-padded ``frames`` over the fft_len//2 + 1 non-negative bins."""
    return np.abs(np.fft.rfft(frames, n=fft_len, axis=-1))


def _interp_plan(freqs: np.ndarray, fft_len: int, sample_rate: int):
    # linear interpolation from FFT bins onto grid points; points above
    # Nyquist get zero weight on both sides
    pos = freqs * fft_len / sample_rate
    n_bins = fft_len // 2 + 1
    lo = np.clip(np.floor(pos).astype(np.int64), 0, n_bins - 2)
    w_hi = pos - lo
    w_lo = 1.0 - w_hi
    above = pos > n_bins - 1
    w_lo[above] = 0.0
    w_hi[above] = 0.0
    return lo, w_lo, w_hi


def frame_spectra(samples: np.ndarray, sample_rate: int, centers, window_len: int,
                  fft_len: int, grid: FrequencyGrid) -> np.ndarray:
    """Hann-windowed magnitude spectra of many frames, sampled on ``grid``.

    Each frame holds ``window_len`` samples starting at ``center - window_len // 2``;
    samples outside the signal are zeros.

    Returns:
        array of shape ``(len(centers), len(grid))``
    """
    _check_fft_len(window_len, fft_len)
    samples = np.asarray(samples, dtype=np.float64)
    centers = np.atleast_1d(np.asarray(centers, dtype=np.int64))
    start = centers - window_len // 2
    pad_lo = max(0, -int(start.min()))
    pad_hi = max(0, int(start.max()) + window_len - len(samples))
    padded = np.concatenate([np.zeros(pad_lo), samples, np.zeros(pad_hi)])
    idx = (start + pad_lo)[:, None] + np.arange(window_len)[None, :]
    mag = magnitude_spectrum(padded[idx] * hann(window_len), fft_len)
    lo, w_lo, w_hi = _interp_plan(grid.freqs, fft_len, sample_rate)
    return mag[:, lo] * w_lo + mag[:, lo + 1] * w_hi


def windowed_spectrum(buf: AudioBuffer, center_sample: int, window_len: int,
                      fft_len: int, grid: FrequencyGrid) -> SampledSpectrum:
    """Spectrum of one Hann-windowed frame centered at ``center_sample``."""
    mag = frame_spectra(buf.samples, buf.sample_rate, [center_sample],
                        window_len, fft_len, grid)[0]
    return SampledSpectrum(grid, mag)
