"""
Window length and low pitches
=============================

Each candidate wants an analysis window of eight periods. Capping the window
lowers latency but starves the lowest candidates of resolution. This script
sweeps the cap on a handful of low sawtooths and reports how the score of
the true candidate and the accuracy change.
"""

import numpy as np

from swipe_pitch import default_bank
from swipe_pitch.audio_io import constant_curve, synth_signal
from swipe_pitch.metrics import evaluate
from swipe_pitch.scorer import ScorerConfig, plan_windows, score_frames
from swipe_pitch.tracker import track

FS = 44100
bank = default_bank()
pitches = [55.0, 70.0, 90.0, 120.0, 160.0]
clips = [synth_signal("sawtooth", constant_curve(f, 1.0, FS), FS, hop_seconds=0.05) for f in pitches]

print("cap      latency  RPA     score of the true candidate per pitch")
for cap in (None, 8192, 4096, 2048, 1024):
    cfg = ScorerConfig(max_window_samples=cap, hop_seconds=0.05)
    plan = plan_windows(bank, FS, cfg)
    hits = total = 0
    true_scores = []
    for f0, (buf, ann) in zip(pitches, clips):
        rep = evaluate(track(buf, bank, cfg), ann)
        hits += rep.rpa * rep.n_voiced_ref
        total += rep.n_voiced_ref
        z = score_frames(buf, [len(buf) // 2], bank, cfg)[0]
        true_scores.append(z[int(round(bank.grid.hz_to_bin(f0)))])
    label = "none" if cap is None else str(cap)
    print(f"{label:8s} {1000 * plan.fft_len / FS / 2:5.0f} ms  {100 * hits / total:5.1f}%  "
          + "  ".join(f"{f:.0f}:{s:.2f}" for f, s in zip(pitches, true_scores)))

# Latency is half the largest window in use. Clean sawtooths stay trackable
# even at short windows; the score margin is what shrinks.
