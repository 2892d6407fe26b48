"""SWIPE scores per analysis frame.

Every candidate's ideal window ``W = 8 * fs / f_c`` samples is bracketed by
the two neighbouring powers of two; the score is computed at both and blended
linearly in ``log2(W)``. A cap on the window length trades low-pitch accuracy
for latency: candidates whose bracket reaches past the cap are scored at the
capped length alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer, frame_count
from .kernels import KernelBank
from .spectral import SampledSpectrum, frame_spectra

__all__ = [
    "ScorerConfig",
    "ScoreFrame",
    "WindowPlan",
    "plan_windows",
    "swipe_score",
    "score_single_window",
    "score_frame",
    "score_frames",
    "score_track",
    "frame_centers",
]


@dataclass(frozen=True)
class ScorerConfig:
    """Scoring options.

    Attributes:
        max_window_samples: cap on the analysis window (a power of two), or
            None to allow the full bracket of the lowest candidate
        interpolate_windows: blend the two bracketing windows; when False each
            candidate uses the power of two nearest to its ideal window in log2
        hop_seconds: frame hop of :func:`score_track`
    """

    max_window_samples: int | None = None
    interpolate_windows: bool = True
    hop_seconds: float = 0.01

    def __post_init__(self):
        m = self.max_window_samples
        if m is not None and (m < 2 or m & (m - 1)):
            raise ValueError(f"max_window_samples must be a power of two >= 2, got {m}")
        if not self.hop_seconds > 0:
            raise ValueError(f"hop_seconds must be positive, got {self.hop_seconds}")


@dataclass(frozen=True)
class ScoreFrame:
    time_s: float
    scores: np.ndarray


@dataclass(frozen=True)
class WindowPlan:
    """Which window lengths are analysed and how each candidate mixes them.

    ``weights[w, c]`` is the contribution of the score at ``windows[w]`` to
    candidate ``c``; every column sums to one.
    """

    windows: np.ndarray
    weights: np.ndarray
    fft_len: int


def plan_windows(bank: KernelBank, sample_rate: int, cfg: ScorerConfig) -> WindowPlan:
    ideal = bank.ideal_window_samples(sample_rate)
    log_w = np.log2(ideal)
    lo_exp = np.floor(log_w).astype(np.int64)
    hi_exp = np.ceil(log_w).astype(np.int64)
    lam = log_w - lo_exp
    # exact powers of two (up to rounding) take a single window
    exact = np.isclose(ideal, 2.0 ** np.round(log_w), rtol=1e-12, atol=0)
    lo_exp = np.where(exact, np.round(log_w).astype(np.int64), lo_exp)
    hi_exp = np.where(exact, lo_exp, hi_exp)
    lam = np.where(exact, 0.0, lam)
    lo_exp = np.maximum(lo_exp, 1)
    hi_exp = np.maximum(hi_exp, 1)

    if not cfg.interpolate_windows:
        single = np.where(lam < 0.5, lo_exp, hi_exp)
        lo_exp, hi_exp, lam = single, single, np.zeros_like(lam)

    if cfg.max_window_samples is not None:
        cap = int(math.log2(cfg.max_window_samples))
        over = hi_exp > cap
        lo_exp = np.where(over, np.minimum(hi_exp, cap), lo_exp)
        hi_exp = np.where(over, lo_exp, hi_exp)
        lam = np.where(over, 0.0, lam)

    exps = np.unique(np.concatenate([lo_exp, hi_exp]))
    row = {e: i for i, e in enumerate(exps)}
    weights = np.zeros((len(exps), len(ideal)))
    cols = np.arange(len(ideal))
    np.add.at(weights, ([row[e] for e in lo_exp], cols), 1.0 - lam)
    np.add.at(weights, ([row[e] for e in hi_exp], cols), lam)
    windows = 2 ** exps
    return WindowPlan(windows, weights, int(windows.max()))


def swipe_score(kernels: np.ndarray, mag: np.ndarray) -> np.ndarray:
    """Normalized inner product of kernels with sqrt-compressed magnitudes.

    ``mag`` may be a single spectrum or a stack (last axis = frequency).
    All-zero spectra score 0 for every candidate.
    """
    mag = np.asarray(mag, dtype=np.float64)
    total = mag.sum(axis=-1, keepdims=True)
    loud = np.sqrt(mag) / np.sqrt(np.where(total > 0, total, 1.0))
    return loud @ kernels.T


def score_single_window(spec: SampledSpectrum, bank: KernelBank, c: int) -> float:
    if not spec.grid.same_as(bank.freq_grid):
        raise ValueError("spectrum and kernel bank are sampled on different frequency grids")
    return float(swipe_score(bank.kernels[c:c + 1], spec.mag)[0])


def score_frames(buf: AudioBuffer, centers, bank: KernelBank, cfg: ScorerConfig,
                 plan: WindowPlan | None = None, chunk: int = 64) -> np.ndarray:
    """Scores for many frames at once, shape ``(len(centers), |C|)``.

    One spectrum per distinct window length is computed for each frame and
    shared by all candidates using that length.
    """
    plan = plan or plan_windows(bank, buf.sample_rate, cfg)
    centers = np.atleast_1d(np.asarray(centers, dtype=np.int64))
    out = np.zeros((len(centers), len(bank.grid)))
    for s in range(0, len(centers), chunk):
        part = centers[s:s + chunk]
        for w, wlen in enumerate(plan.windows):
            mag = frame_spectra(buf.samples, buf.sample_rate, part, int(wlen),
                                plan.fft_len, bank.freq_grid)
            out[s:s + chunk] += swipe_score(bank.kernels, mag) * plan.weights[w]
    return out


def score_frame(buf: AudioBuffer, center_sample: int, bank: KernelBank,
                cfg: ScorerConfig, plan: WindowPlan | None = None) -> ScoreFrame:
    scores = score_frames(buf, [center_sample], bank, cfg, plan)[0]
    return ScoreFrame(center_sample / buf.sample_rate, scores)


def frame_centers(buf: AudioBuffer, hop_seconds: float) -> np.ndarray:
    n = frame_count(len(buf), buf.sample_rate, hop_seconds)
    return np.round(np.arange(n) * hop_seconds * buf.sample_rate).astype(np.int64)


def score_track(buf: AudioBuffer, bank: KernelBank, cfg: ScorerConfig) -> list[ScoreFrame]:
    """Score frames centered at 0, hop, 2*hop, ... (``ceil(duration / hop)`` frames)."""
    if len(buf) < cfg.hop_seconds * buf.sample_rate:
        raise ValueError("buffer is shorter than one hop")
    centers = frame_centers(buf, cfg.hop_seconds)
    scores = score_frames(buf, centers, bank, cfg)
    return [ScoreFrame(c / buf.sample_rate, s) for c, s in zip(centers, scores)]
