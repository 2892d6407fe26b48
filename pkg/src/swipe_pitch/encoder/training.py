"""Self-supervised and supervised training of the Toeplitz encoder.

Both loops draw frames on the scorer's hop grid, compute SWIPE scores from
audio (shifted and augmented copies are re-scored at every step) and update the
taps with Adam using the analytic gradients of :mod:`.losses`. Each batch
element gets its own generator seeded from ``(seed, step, index)``, so a run
is reproducible regardless of how the batch is evaluated.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..audio_io import Annotation, AudioBuffer, resample_shift
from ..kernels import KernelBank
from ..scorer import ScorerConfig, WindowPlan, frame_centers, plan_windows, score_frames
from ..tracker import PitchTrack, parabolic_offset, voicing_from_score
from .augment import AugmentConfig, augment
from .losses import (
    gaussian_target,
    loss_ce,
    loss_ce_grad,
    loss_equivariance,
    loss_equivariance_grad,
    loss_invariance,
    loss_invariance_grad,
    loss_sce,
    loss_sce_grad,
    softmax_backward,
)
from .model import N_TAPS, ToeplitzEncoder, entropy, init_taps, softmax, taps_gradient, toeplitz_logits

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "Adam",
    "ssl_batch_loss",
    "supervised_batch_loss",
    "train_self_supervised",
    "train_supervised",
    "encoder_scores_to_track",
    "track_with_encoder",
]

log = logging.getLogger(__name__)

_RESAMPLE_MARGIN = 64


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 2.0 ** (1.0 / 36.0)
    w_equiv: float = 1.0
    w_sce: float = 1.0
    w_inv: float = 1.0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 256
    steps: int = 1000
    shift_range_semitones: int = 5
    huber_delta: float = 1.0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    sigma_bins: float = 1.0
    init_noise: float = 1e-3
    n_taps: int = N_TAPS
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if self.lr < 0 or self.batch_size < 1 or self.steps < 0:
            raise ValueError("lr must be >= 0, batch_size >= 1, steps >= 0")
        if self.shift_range_semitones < 0:
            raise ValueError("shift_range_semitones must be >= 0")


class Adam:
    """Adam on a single parameter vector."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# batch objectives (value and gradient w.r.t. the taps)
# ---------------------------------------------------------------------------

def ssl_batch_loss(taps, scores, scores_shift, scores_aug, k_bins, cfg: TrainConfig):
    """Weighted self-supervised loss averaged over the batch, and its taps gradient.

    Returns:
        (total, grad, parts) where parts maps loss name to its batch mean
    """
    y = softmax(toeplitz_logits(scores, taps))
    y_k = softmax(toeplitz_logits(scores_shift, taps))
    y_a = softmax(toeplitz_logits(scores_aug, taps))
    n = len(y)
    l_eq = loss_equivariance(y, y_k, k_bins, cfg.alpha, cfg.huber_delta)
    l_sce = loss_sce(y, y_k, k_bins)
    l_inv = loss_invariance(y, y_a)
    total = (cfg.w_equiv * l_eq.mean() + cfg.w_sce * l_sce.mean() + cfg.w_inv * l_inv.mean())

    g_eq_y, g_eq_k = loss_equivariance_grad(y, y_k, k_bins, cfg.alpha, cfg.huber_delta)
    g_sce_y, g_sce_k = loss_sce_grad(y, y_k, k_bins)
    g_inv_y, g_inv_a = loss_invariance_grad(y, y_a)
    gy = (cfg.w_equiv * g_eq_y + cfg.w_sce * g_sce_y + cfg.w_inv * g_inv_y) / n
    gk = (cfg.w_equiv * g_eq_k + cfg.w_sce * g_sce_k) / n
    ga = cfg.w_inv * g_inv_a / n
    n_taps = len(taps)
    grad = (taps_gradient(scores, softmax_backward(y, gy), n_taps)
            + taps_gradient(scores_shift, softmax_backward(y_k, gk), n_taps)
            + taps_gradient(scores_aug, softmax_backward(y_a, ga), n_taps))
    parts = {"equiv": float(l_eq.mean()), "sce": float(l_sce.mean()), "inv": float(l_inv.mean())}
    return float(total), grad, parts


def supervised_batch_loss(taps, scores, targets):
    """Mean cross-entropy to the blurred targets and its taps gradient."""
    y = softmax(toeplitz_logits(scores, taps))
    loss = loss_ce(targets, y)
    g = softmax_backward(y, loss_ce_grad(targets, y) / len(y))
    return float(loss.mean()), taps_gradient(scores, g, len(taps))


# ---------------------------------------------------------------------------
# frame extraction and scoring
# ---------------------------------------------------------------------------

class _FrameScorer:
    """Scores frames of short audio chunks, batching all chunks into one buffer."""

    def __init__(self, bank: KernelBank, scorer_cfg: ScorerConfig, sample_rate: int):
        self.bank = bank
        self.cfg = scorer_cfg
        self.sample_rate = sample_rate
        self.plan: WindowPlan = plan_windows(bank, sample_rate, scorer_cfg)
        self.half_window = self.plan.fft_len // 2

    def chunk(self, buf: AudioBuffer, center: int, half: int) -> np.ndarray:
        lo, hi = center - half, center + half
        x = buf.samples[max(lo, 0):min(hi, len(buf))]
        return np.concatenate([np.zeros(max(0, -lo)), x, np.zeros(max(0, hi - len(buf)))])

    def score(self, chunks: list[np.ndarray], centers: list[int]) -> np.ndarray:
        # chunks are laid end to end with a full window of silence between them
        gap = np.zeros(self.plan.fft_len)
        pieces, abs_centers, offset = [], [], 0
        for c, ctr in zip(chunks, centers):
            pieces += [c, gap]
            abs_centers.append(offset + ctr)
            offset += len(c) + len(gap)
        joined = AudioBuffer(np.concatenate(pieces), self.sample_rate)
        return score_frames(joined, abs_centers, self.bank, self.cfg, self.plan)


def _check_corpus(corpus) -> int:
    if not corpus:
        raise ValueError("training corpus is empty")
    rates = {buf.sample_rate for buf in corpus}
    if len(rates) != 1:
        raise ValueError(f"corpus mixes sample rates {sorted(rates)}")
    return rates.pop()


def _check_finite(loss: float, step: int, parts=None):
    if not math.isfinite(loss):
        detail = f" (components: {parts})" if parts else ""
        raise TrainingDiverged(f"non-finite loss {loss} at step {step}{detail}")


def train_self_supervised(corpus: list[AudioBuffer], bank: KernelBank,
                          scorer_cfg: ScorerConfig, train_cfg: TrainConfig,
                          progress=None) -> tuple[ToeplitzEncoder, np.ndarray]:
    """Fit the taps with the equivariance, shifted cross-entropy and invariance losses.

    For every sampled frame ``x`` a random integer shift ``k`` (semitones) is
    drawn, ``x`` is pitch-shifted by resampling and separately augmented, and
    all three versions are scored with SWIPE.

    Returns:
        the trained encoder and the total loss of every step
    """
    fs = _check_corpus(corpus)
    scorer = _FrameScorer(bank, scorer_cfg, fs)
    bps = bank.grid.bins_per_semitone
    k_max = train_cfg.shift_range_semitones
    if k_max * bps >= len(bank.grid):
        raise ValueError("shift range exceeds the number of output bins")
    ratio_max = 2.0 ** (k_max / 12.0)
    half = int(math.ceil(scorer.half_window * ratio_max)) + _RESAMPLE_MARGIN
    grid_centers = [frame_centers(buf, scorer_cfg.hop_seconds) for buf in corpus]
    plain_cache: dict[tuple[int, int], np.ndarray] = {}

    taps = init_taps(np.random.default_rng([train_cfg.seed]), train_cfg.n_taps, train_cfg.init_noise)
    opt = Adam(train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    history = np.zeros(train_cfg.steps)

    for step in range(train_cfg.steps):
        plain_chunks, shift_chunks, aug_chunks = [], [], []
        shift_centers, ks, keys = [], [], []
        for b in range(train_cfg.batch_size):
            rng = np.random.default_rng([train_cfg.seed, step, b])
            ci = int(rng.integers(len(corpus)))
            fi = int(rng.integers(len(grid_centers[ci])))
            k = int(rng.integers(-k_max, k_max + 1))
            aug_seed = int(rng.integers(2 ** 63))
            buf = corpus[ci]
            chunk = scorer.chunk(buf, int(grid_centers[ci][fi]), half)
            keys.append((ci, fi))
            if (ci, fi) not in plain_cache:
                plain_chunks.append((len(keys) - 1, chunk))
            shifted = resample_shift(AudioBuffer(chunk, fs), k).samples
            shift_chunks.append(shifted)
            shift_centers.append(int(round(half / 2.0 ** (k / 12.0))))
            aug_chunks.append(augment(AudioBuffer(chunk, fs), train_cfg.augment, aug_seed).samples)
            ks.append(k)

        if plain_chunks:
            fresh = scorer.score([c for _, c in plain_chunks], [half] * len(plain_chunks))
            for (b, _), s in zip(plain_chunks, fresh):
                plain_cache[keys[b]] = s
        scores = np.stack([plain_cache[key] for key in keys])
        scores_shift = scorer.score(shift_chunks, shift_centers)
        scores_aug = scorer.score(aug_chunks, [half] * len(aug_chunks))
        k_bins = np.asarray(ks) * bps

        loss, grad, parts = ssl_batch_loss(taps, scores, scores_shift, scores_aug, k_bins, train_cfg)
        _check_finite(loss, step, parts)
        history[step] = loss
        taps = opt.step(taps, grad)
        if progress is not None:
            progress(step, loss, parts)
        log.debug("step %d loss %.5f %s", step, loss, parts)
    return ToeplitzEncoder(taps, len(bank.grid), len(bank.grid)), history


def train_supervised(corpus: list[tuple[AudioBuffer, Annotation]], bank: KernelBank,
                     scorer_cfg: ScorerConfig, train_cfg: TrainConfig,
                     progress=None) -> tuple[ToeplitzEncoder, np.ndarray]:
    """Fit the taps by cross-entropy against Gaussian-blurred ground-truth bins.

    Only annotated voiced frames are used; each is scored at the annotation
    time. Returns the trained encoder and the per-step loss.
    """
    fs = _check_corpus([buf for buf, _ in corpus])
    scorer = _FrameScorer(bank, scorer_cfg, fs)
    voiced = [(ci, fi) for ci, (_, ann) in enumerate(corpus) for fi in np.flatnonzero(ann.f0 > 0)]
    if not voiced:
        raise ValueError("supervised training needs annotated voiced frames")
    cache: dict[tuple[int, int], np.ndarray] = {}

    taps = init_taps(np.random.default_rng([train_cfg.seed]), train_cfg.n_taps, train_cfg.init_noise)
    opt = Adam(train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    history = np.zeros(train_cfg.steps)

    for step in range(train_cfg.steps):
        picks = []
        for b in range(train_cfg.batch_size):
            rng = np.random.default_rng([train_cfg.seed, step, b])
            picks.append(voiced[int(rng.integers(len(voiced)))])
        missing = [p for p in dict.fromkeys(picks) if p not in cache]
        if missing:
            chunks, centers = [], []
            for ci, fi in missing:
                buf, ann = corpus[ci]
                center = int(round(fi * ann.hop_seconds * fs))
                chunks.append(scorer.chunk(buf, center, scorer.half_window))
                centers.append(scorer.half_window)
            for key, s in zip(missing, scorer.score(chunks, centers)):
                cache[key] = s
        scores = np.stack([cache[p] for p in picks])
        f0 = np.array([corpus[ci][1].f0[fi] for ci, fi in picks])
        targets = gaussian_target(f0, bank.grid, train_cfg.sigma_bins)

        loss, grad = supervised_batch_loss(taps, scores, targets)
        _check_finite(loss, step)
        history[step] = loss
        taps = opt.step(taps, grad)
        if progress is not None:
            progress(step, loss, {"ce": loss})
    return ToeplitzEncoder(taps, len(bank.grid), len(bank.grid)), history


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def encoder_scores_to_track(scores: np.ndarray, enc: ToeplitzEncoder, bank: KernelBank,
                            hop_seconds: float, refine: bool = True,
                            entropy_threshold: float | None = None,
                            score_threshold: float = 0.0) -> PitchTrack:
    """Turn raw SWIPE score frames into a track through the encoder.

    The peak of the output distribution is refined with a parabola through
    the log-probabilities around it. Voicing uses the output entropy when
    ``entropy_threshold`` is given, otherwise the raw peak SWIPE score.
    """
    z = enc.logits(scores)
    y = softmax(z)
    best = np.argmax(z, axis=1)
    rows = np.arange(len(z))
    pos = best.astype(np.float64)
    if refine:
        interior = (best > 0) & (best < z.shape[1] - 1)
        b = np.where(interior, best, 1)
        off = parabolic_offset(z[rows, b - 1], z[rows, b], z[rows, b + 1])
        pos += np.where(interior, off, 0.0)
    if entropy_threshold is not None:
        voiced = entropy(y) < entropy_threshold
    else:
        voiced = voicing_from_score(scores.max(axis=1), score_threshold)
    return PitchTrack(hop_seconds, bank.grid.bin_to_hz(pos), y[rows, best], voiced)


def track_with_encoder(buf: AudioBuffer, bank: KernelBank, scorer_cfg: ScorerConfig,
                       enc: ToeplitzEncoder, refine: bool = True,
                       entropy_threshold: float | None = None,
                       score_threshold: float = 0.0) -> PitchTrack:
    centers = frame_centers(buf, scorer_cfg.hop_seconds)
    scores = score_frames(buf, centers, bank, scorer_cfg)
    return encoder_scores_to_track(scores, enc, bank, scorer_cfg.hop_seconds, refine,
                                   entropy_threshold, score_threshold)
