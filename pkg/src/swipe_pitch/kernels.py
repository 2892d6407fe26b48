"""Pitch-candidate grid and SWIPE / SWIPE' spectral kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .spectral import FrequencyGrid

__all__ = [
    "PitchGrid",
    "KernelBank",
    "build_pitch_grid",
    "primes_upto",
    "active_harmonics",
    "kernel_for",
    "build_kernel_bank",
]

Variant = Literal["swipe", "swipe_prime"]

#: ideal analysis window is this many periods of the candidate
WINDOW_PERIODS = 8.0


@dataclass(frozen=True)
class PitchGrid:
    """Log-spaced pitch candidates ``f_min * 2**(i / (12 * bins_per_semitone))``."""

    f_min: float
    f_max: float
    bins_per_semitone: int
    candidates: np.ndarray

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def bins_per_octave(self) -> int:
        return 12 * self.bins_per_semitone

    def hz_to_bin(self, f):
        """Fractional candidate index of frequency ``f``."""
        return self.bins_per_octave * np.log2(np.asarray(f, dtype=np.float64) / self.f_min)

    def bin_to_hz(self, b):
        return self.f_min * 2.0 ** (np.asarray(b, dtype=np.float64) / self.bins_per_octave)

    def cents_per_bin(self) -> float:
        return 100.0 / self.bins_per_semitone


def build_pitch_grid(f_min: float = 27.5, f_max: float = 8055.0,
                     bins_per_semitone: int = 3) -> PitchGrid:
    """Candidates from ``f_min`` up to the last one not exceeding ``f_max``.

    The defaults give 295 candidates from 27.5 Hz (A0) to about 7.9 kHz.
    """
    if not 0 < f_min < f_max:
        raise ValueError(f"need 0 < f_min < f_max, got {f_min}, {f_max}")
    if int(bins_per_semitone) != bins_per_semitone or bins_per_semitone < 1:
        raise ValueError(f"bins_per_semitone must be a positive integer, got {bins_per_semitone}")
    per_octave = 12 * int(bins_per_semitone)
    n = int(math.floor(per_octave * math.log2(f_max / f_min) + 1e-9)) + 1
    candidates = f_min * 2.0 ** (np.arange(n) / per_octave)
    candidates.setflags(write=False)
    return PitchGrid(float(f_min), float(f_max), int(bins_per_semitone), candidates)


def primes_upto(n: int) -> list[int]:
    """Primes <= n by trial division (n stays in the low hundreds here)."""
    primes: list[int] = []
    for k in range(2, n + 1):
        if all(k % p for p in primes if p * p <= k):
            primes.append(k)
    return primes


def active_harmonics(n_max: int, variant: Variant) -> np.ndarray:
    """Harmonic numbers carrying a lobe: all of 1..n_max, or 1 and the primes."""
    if variant == "swipe":
        return np.arange(1, n_max + 1)
    if variant == "swipe_prime":
        return np.array([1] + primes_upto(n_max), dtype=np.int64)
    raise ValueError(f"unknown kernel variant {variant!r}")


def _raw_kernel(freqs: np.ndarray, f_c: float, f_top: float, variant: Variant) -> np.ndarray:
    # highest harmonic whose main lobe (|r - i| < 1/4) ends below f_top
    n_max = int(math.floor(f_top / f_c - 0.25 + 1e-12))
    if n_max < 1:
        raise ValueError(f"candidate {f_c} Hz is too high: no harmonic lobe fits below {f_top} Hz")
    harm = active_harmonics(n_max, variant)
    r = freqs / f_c
    # nearest active harmonic for every grid point
    if len(harm) == 1:
        nearest = np.ones(len(r), dtype=np.int64)
    else:
        j = np.clip(np.searchsorted(harm, r), 1, len(harm) - 1)
        below, above = harm[j - 1], harm[j]
        nearest = np.where(r - below <= above - r, below, above)
    dist = np.abs(r - nearest)
    shape = np.cos(2 * np.pi * r)
    k = np.where(dist < 0.25, shape, np.where(dist < 0.75, 0.5 * shape, 0.0))
    return k / np.sqrt(nearest)


def kernel_for(f_c: float, freq_grid: FrequencyGrid, variant: Variant = "swipe_prime") -> np.ndarray:
    """Unit-L2-norm kernel of candidate ``f_c`` sampled on ``freq_grid``.

    With ``r = f / f_c`` and ``i`` the nearest active harmonic, the kernel is
    ``cos(2 pi r)`` on the lobe ``|r - i| < 1/4``, half that on the valleys
    ``1/4 <= |r - i| < 3/4`` and zero elsewhere, scaled by ``1/sqrt(i)``.
    """
    if not f_c > 0:
        raise ValueError(f"candidate frequency must be positive, got {f_c}")
    k = _raw_kernel(freq_grid.freqs, float(f_c), freq_grid.f_hi, variant)
    norm = np.linalg.norm(k)
    if norm == 0:
        raise ValueError(f"kernel for {f_c} Hz is empty on this frequency grid")
    return k / norm


@dataclass(frozen=True)
class KernelBank:
    """One kernel per pitch candidate, rows of ``kernels`` (shape |C| x len(freq_grid))."""

    grid: PitchGrid
    freq_grid: FrequencyGrid
    variant: str
    kernels: np.ndarray
    ideal_window_s: np.ndarray

    def ideal_window_samples(self, sample_rate: int) -> np.ndarray:
        return self.ideal_window_s * sample_rate


def build_kernel_bank(grid: PitchGrid, freq_grid: FrequencyGrid,
                      variant: Variant = "swipe_prime") -> KernelBank:
    kernels = np.stack([kernel_for(f, freq_grid, variant) for f in grid.candidates])
    kernels.setflags(write=False)
    ideal = WINDOW_PERIODS / grid.candidates
    return KernelBank(grid, freq_grid, variant, kernels, ideal)
