"""Peak picking, parabolic refinement and voicing on SWIPE score frames."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .kernels import KernelBank, PitchGrid
from .scorer import ScoreFrame, ScorerConfig, frame_centers, score_frames

__all__ = [
    "PitchTrack",
    "parabolic_offset",
    "pick_pitch",
    "pick_pitches",
    "voicing_from_score",
    "track",
    "track_from_scores",
]


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame pitch estimates on a uniform hop.

    ``f0_hz`` holds the best candidate for every frame, voiced or not, so that
    pitch accuracy can be measured independently of the voicing decision.
    """

    hop_seconds: float
    f0_hz: np.ndarray
    confidence: np.ndarray
    voiced: np.ndarray

    def __post_init__(self):
        for name in ("f0_hz", "confidence"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        voiced = np.asarray(self.voiced, dtype=bool)
        voiced.setflags(write=False)
        object.__setattr__(self, "voiced", voiced)
        if not (len(self.f0_hz) == len(self.confidence) == len(self.voiced)):
            raise ValueError("f0_hz, confidence and voiced must have equal lengths")
        if not self.hop_seconds > 0:
            raise ValueError("hop_seconds must be positive")

    def __len__(self) -> int:
        return len(self.f0_hz)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.hop_seconds


def parabolic_offset(left, center, right):
    """Vertex offset (in bins, within [-0.5, 0.5]) of the parabola through three points.

    Works elementwise on arrays; a flat or non-concave neighbourhood gives 0.
    """
    left, center, right = (np.asarray(v, dtype=np.float64) for v in (left, center, right))
    denom = left - 2.0 * center + right
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    return np.clip(off, -0.5, 0.5)


def pick_pitches(scores: np.ndarray, grid: PitchGrid, refine: bool = True):
    """Vectorized :func:`pick_pitch` over a ``(frames, |C|)`` score matrix.

    Returns:
        tuple of (f0 in Hz, confidence) arrays
    """
    scores = np.atleast_2d(scores)
    best = np.argmax(scores, axis=1)
    rows = np.arange(len(scores))
    conf = scores[rows, best]
    pos = best.astype(np.float64)
    if refine:
        interior = (best > 0) & (best < scores.shape[1] - 1)
        b = np.where(interior, best, 1)
        off = parabolic_offset(scores[rows, b - 1], scores[rows, b], scores[rows, b + 1])
        pos = pos + np.where(interior, off, 0.0)
    return grid.bin_to_hz(pos), conf


def pick_pitch(frame: ScoreFrame | np.ndarray, grid: PitchGrid,
               refine: bool = True) -> tuple[float, float]:
    """Best candidate of one frame and its score (ties go to the lowest index).

    With ``refine``, a parabola through the peak and its two neighbours in
    (log-frequency, score) moves the estimate by at most half a bin.
    """
    scores = frame.scores if isinstance(frame, ScoreFrame) else np.asarray(frame)
    if len(scores) < 3:
        raise ValueError("need at least three candidates")
    f0, conf = pick_pitches(scores[None, :], grid, refine)
    return float(f0[0]), float(conf[0])


def voicing_from_score(confidence, threshold: float = 0.0):
    """Voiced iff the peak score strictly exceeds ``threshold``."""
    return np.asarray(confidence) > threshold


def track_from_scores(scores: np.ndarray, grid: PitchGrid, hop_seconds: float,
                      refine: bool = True, threshold: float = 0.0) -> PitchTrack:
    f0, conf = pick_pitches(scores, grid, refine)
    return PitchTrack(hop_seconds, f0, conf, voicing_from_score(conf, threshold))


def track(buf: AudioBuffer, bank: KernelBank, cfg: ScorerConfig | None = None,
          refine: bool = True, threshold: float = 0.0) -> PitchTrack:
    """Estimate pitch for frames every ``cfg.hop_seconds``, starting at t = 0."""
    cfg = cfg or ScorerConfig()
    if len(buf) < cfg.hop_seconds * buf.sample_rate:
        raise ValueError("buffer is shorter than one hop")
    scores = score_frames(buf, frame_centers(buf, cfg.hop_seconds), bank, cfg)
    return track_from_scores(scores, bank.grid, cfg.hop_seconds, refine, threshold)
