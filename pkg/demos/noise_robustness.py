"""
Robustness to white noise
=========================

Corrupt a small sawtooth corpus with white noise at decreasing SNR and
watch raw pitch accuracy fall. The same noise seed is used at every level,
so only the noise power changes between rows.
"""

import numpy as np

from swipe_pitch import default_bank
from swipe_pitch.audio_io import constant_curve, synth_signal
from swipe_pitch.metrics import evaluate_with_noise_sweep
from swipe_pitch.scorer import ScorerConfig
from swipe_pitch.tracker import track

FS = 44100
bank = default_bank()
cfg = ScorerConfig(hop_seconds=0.05)
f0s = np.exp(np.random.default_rng(0).uniform(np.log(55), np.log(1760), 10))
snrs = [10, 5, 0, -5, -10]

totals = {}
for i, f0 in enumerate(f0s):
    buf, ann = synth_signal("sawtooth", constant_curve(float(f0), 1.0, FS), FS, hop_seconds=0.05)
    sweep = evaluate_with_noise_sweep(buf, ann, lambda b: track(b, bank, cfg), snrs, seed=i)
    for snr, rep in sweep:
        totals.setdefault(snr, []).append(rep.rpa)

for snr, values in totals.items():
    label = "clean" if snr is None else f"{snr:+g} dB"
    print(f"{label:>7s}  RPA {100 * np.mean(values):5.1f}%")
