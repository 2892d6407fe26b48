"""Frame-level pitch evaluation: raw pitch accuracy, voicing F-score and overall accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .audio_io import Annotation, AudioBuffer, add_noise
from .tracker import PitchTrack

CENTS_TOLERANCE = 50.0
HOP_TOLERANCE = 0.01

CSV_HEADER = "snr_db,rpa,f_score,oa,n_voiced_ref,n_frames"


def cents_diff(f_est, f_ref):
    """Absolute interval between two frequencies in cents.

    Args:
        f_est: Estimated frequency in Hz (scalar or array).
        f_ref: Reference frequency in Hz (scalar or array).

    Returns:
        ``|1200 * log2(f_est / f_ref)|``; a float for scalar input.

    Raises:
        ValueError: If any frequency is not strictly positive.
    """
    f_est = np.asarray(f_est, dtype=np.float64)
    f_ref = np.asarray(f_ref, dtype=np.float64)
    if np.any(~(f_est > 0)) or np.any(~(f_ref > 0)):
        raise ValueError("cents_diff needs strictly positive frequencies")
    out = np.abs(1200.0 * np.log2(f_est / f_ref))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EvalReport:
    """Scores of one track against one annotation.

    A metric whose denominator is empty is ``None`` rather than NaN.
    """

    rpa: Optional[float]
    f_score: Optional[float]
    oa: Optional[float]
    n_voiced_ref: int
    n_frames: int

    def __post_init__(self):
        for name in ("rpa", "f_score", "oa"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0 <= self.n_voiced_ref <= self.n_frames:
            raise ValueError("need 0 <= n_voiced_ref <= n_frames")

    def csv_row(self, snr_db: Optional[float] = None) -> str:
        """One line matching ``CSV_HEADER``; missing values are left empty."""

        def fmt(v):
            return "" if v is None else f"{v:.6f}"

        snr = "clean" if snr_db is None else f"{snr_db:g}"
        return f"{snr},{fmt(self.rpa)},{fmt(self.f_score)},{fmt(self.oa)},{self.n_voiced_ref},{self.n_frames}"

    def describe(self) -> str:
        """Multi-line human-readable summary."""

        def pct(v):
            return "n/a" if v is None else f"{100 * v:6.2f}%"

        return "\n".join(
            [
                f"frames          {self.n_frames}",
                f"voiced (ref)    {self.n_voiced_ref}",
                f"RPA             {pct(self.rpa)}",
                f"voicing F       {pct(self.f_score)}",
                f"overall acc.    {pct(self.oa)}",
            ]
        )


def _align(track: PitchTrack, annotation: Annotation):
    ht, ha = track.hop_seconds, annotation.hop_seconds
    if abs(ht - ha) > HOP_TOLERANCE * ha:
        raise ValueError(f"hop mismatch: track {ht:g} s vs annotation {ha:g} s")
    n_t, n_a = len(track), len(annotation)
    if abs(n_t - n_a) > 1:
        raise ValueError(f"length mismatch: track has {n_t} frames, annotation {n_a}")
    n = min(n_t, n_a)
    return track.f0_hz[:n], track.voiced[:n], annotation.f0[:n]


def pitch_correct(f_est: np.ndarray, f_ref: np.ndarray) -> np.ndarray:
    """Per-frame flag: both frequencies positive and within 50 cents (inclusive)."""
    f_est = np.asarray(f_est, dtype=np.float64)
    f_ref = np.asarray(f_ref, dtype=np.float64)
    ok = (f_est > 0) & (f_ref > 0)
    out = np.zeros(f_est.shape, dtype=bool)
    if ok.any():
        out[ok] = cents_diff(f_est[ok], f_ref[ok]) <= CENTS_TOLERANCE
    return out


def evaluate(track: PitchTrack, annotation: Annotation) -> EvalReport:
    """Compare a pitch track with a reference annotation frame by frame.

    Frames are aligned by index. A reference frame is voiced when its f0 is
    positive. RPA ignores the track's voicing flags; an estimate that is not
    positive counts as wrong.

    Args:
        track: Estimated track.
        annotation: Reference on the same hop (within 1%); the two may differ
            in length by one frame, the excess being dropped.

    Returns:
        An ``EvalReport``.

    Raises:
        ValueError: On a hop mismatch or a length difference above one frame.
    """
    f_est, pred_v, f_ref = _align(track, annotation)
    ref_v = f_ref > 0
    correct = pitch_correct(f_est, f_ref)
    n = len(f_ref)
    n_ref = int(ref_v.sum())
    n_pred = int(pred_v.sum())
    tp = int(np.sum(pred_v & ref_v))

    rpa = float(np.sum(correct & ref_v)) / n_ref if n_ref else None
    if n_ref:
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_ref
        f_score = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    else:
        f_score = None
    frame_ok = np.where(ref_v, pred_v & correct, ~pred_v)
    oa = float(frame_ok.sum()) / n if n else None
    return EvalReport(rpa, f_score, oa, n_ref, n)


def evaluate_with_noise_sweep(
    buf: AudioBuffer,
    annotation: Annotation,
    estimator: Callable[[AudioBuffer], PitchTrack],
    snrs: Sequence[float],
    seed: int = 0,
) -> list[tuple[Optional[float], EvalReport]]:
    """Evaluate an estimator on a clean clip and on white-noise corrupted copies.

    Every SNR uses the same noise seed, so the corruptions differ only in level.

    Args:
        buf: Clean input.
        annotation: Reference for ``buf``.
        estimator: Maps audio to a track on the annotation's hop.
        snrs: Noise levels in dB.
        seed: Noise seed.

    Returns:
        ``[(None, clean_report), (snr, report), ...]`` in the order given.
    """
    out: list[tuple[Optional[float], EvalReport]] = [(None, evaluate(estimator(buf), annotation))]
    for snr in snrs:
        noisy = add_noise(buf, float(snr), seed)
        out.append((float(snr), evaluate(estimator(noisy), annotation)))
    return out
