"""
Training the tiny encoder
=========================

The encoder is a single 647-tap convolution over the 295 SWIPE scores,
followed by a softmax. Supervised training pulls its output toward a
Gaussian around the true bin. Self-supervised training uses transposed and
augmented copies of each frame instead of labels.

Both runs below are short (200 steps). The supervised run keeps the pitch
where it belongs. The self-supervised losses only constrain relative
positions, so watch where the trained filter puts its weight.
"""

import numpy as np

from swipe_pitch import default_bank
from swipe_pitch.audio_io import constant_curve, synth_signal
from swipe_pitch.encoder import TrainConfig, track_with_encoder, train_self_supervised, train_supervised
from swipe_pitch.metrics import evaluate
from swipe_pitch.scorer import ScorerConfig
from swipe_pitch.tracker import track

FS = 44100
bank = default_bank()


def clips(seed, n, hop):
    f0s = np.exp(np.random.default_rng(seed).uniform(np.log(55), np.log(1760), n))
    return [synth_signal("sawtooth", constant_curve(float(f), 1.0, FS), FS, hop_seconds=hop) for f in f0s]


train = clips(1, 30, 0.01)
held_out = clips(99, 10, 0.05)
cfg = TrainConfig(lr=0.01, batch_size=16, steps=200)
eval_cfg = ScorerConfig(hop_seconds=0.05)


def held_out_rpa(estimate):
    return np.mean([evaluate(estimate(buf), ann).rpa for buf, ann in held_out])


print(f"raw SWIPE' held-out RPA: {100 * held_out_rpa(lambda b: track(b, bank, eval_cfg)):.1f}%")

enc, hist = train_supervised(train, bank, ScorerConfig(), cfg)
print(f"supervised: loss {hist[:20].mean():.3f} -> {hist[-20:].mean():.3f}, held-out RPA "
      f"{100 * held_out_rpa(lambda b: track_with_encoder(b, bank, eval_cfg, enc)):.1f}%")

enc, hist = train_self_supervised([buf for buf, _ in train], bank, ScorerConfig(), cfg)
offset = int(np.argmax(enc.taps)) - len(enc.taps) // 2
print(f"self-supervised: loss {hist[:20].mean():.3f} -> {hist[-20:].mean():.3f}, largest tap at "
      f"offset {offset:+d} bins, held-out RPA "
      f"{100 * held_out_rpa(lambda b: track_with_encoder(b, bank, eval_cfg, enc)):.1f}%")
