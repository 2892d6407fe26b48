"""Pitch-preserving time-domain augmentation: noise, random FIR colouring, gain."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin2

from ..audio_io import AudioBuffer

__all__ = ["AugmentConfig", "random_fir", "augment"]


@dataclass(frozen=True)
class AugmentConfig:
    """Ranges the augmentation draws from (all uniform).

    Attributes:
        snr_range_db: white-noise SNR range; ``(inf, inf)`` disables noise
        fir_points: number of log-magnitude control points across 0..Nyquist
        fir_db_range: range of each control point in dB
        fir_taps: length of the linear-phase FIR (odd)
        gain_range_db: output gain range in dB
    """

    snr_range_db: tuple[float, float] = (0.0, 30.0)
    fir_points: int = 8
    fir_db_range: tuple[float, float] = (-6.0, 6.0)
    fir_taps: int = 129
    gain_range_db: tuple[float, float] = (-6.0, 6.0)

    def __post_init__(self):
        if self.fir_points < 2:
            raise ValueError("need at least two FIR control points")
        if self.fir_taps < 1 or self.fir_taps % 2 == 0:
            raise ValueError("fir_taps must be a positive odd number")
        for name in ("snr_range_db", "fir_db_range", "gain_range_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be (low, high), got {(lo, hi)}")


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return lo if lo == hi else float(rng.uniform(lo, hi))


def random_fir(control_db: np.ndarray, n_taps: int, n_freqs: int = 1025) -> np.ndarray:
    """Linear-phase FIR whose log-magnitude response interpolates ``control_db``.

    Control points are spread evenly from DC to Nyquist.
    """
    grid = np.linspace(0.0, 1.0, n_freqs)
    db = np.interp(grid, np.linspace(0.0, 1.0, len(control_db)), control_db)
    return firwin2(n_taps, grid, 10.0 ** (db / 20.0))


def augment(buf: AudioBuffer, cfg: AugmentConfig, seed) -> AudioBuffer:
    """Noise at a random SNR, then a random FIR colouring, then a random gain."""
    if len(buf) <= cfg.fir_taps:
        raise ValueError(f"frame of {len(buf)} samples is not longer than the FIR ({cfg.fir_taps})")
    rng = np.random.default_rng(seed)
    x = buf.samples.copy()

    snr = _uniform(rng, *cfg.snr_range_db)
    if snr != math.inf:
        p = float(np.mean(x ** 2))
        if p > 0:
            noise = rng.standard_normal(len(x))
            noise *= math.sqrt(p / 10 ** (snr / 10) / np.mean(noise ** 2))
            x += noise

    control = np.array([_uniform(rng, *cfg.fir_db_range) for _ in range(cfg.fir_points)])
    if np.any(control != 0):
        x = fftconvolve(x, random_fir(control, cfg.fir_taps), mode="same")

    gain_db = _uniform(rng, *cfg.gain_range_db)
    if gain_db:
        x *= 10.0 ** (gain_db / 20.0)
    return AudioBuffer(x, buf.sample_rate)
