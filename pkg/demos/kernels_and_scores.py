"""
Kernels and scores
==================

A SWIPE kernel is a spectral template: positive cosine lobes at the harmonics
of a candidate pitch, negative valleys between them. The prime variant keeps
only the first and prime-numbered harmonics. This script prints where the
lobes of a 330 Hz kernel sit and shows which candidates score highest for a
sawtooth at that pitch.
"""

import numpy as np

from swipe_pitch import default_bank
from swipe_pitch.audio_io import constant_curve, synth_signal
from swipe_pitch.kernels import kernel_for
from swipe_pitch.scorer import ScorerConfig, score_frames

FS = 44100

# the frequency grid is shared by every kernel: 1024 points, mel-spaced
bank = default_bank("swipe_prime")
freqs = bank.freq_grid.freqs
print(f"frequency grid: {len(freqs)} points from {freqs[0]:.3f} to {freqs[-1]:.2f} Hz")

# positive lobes of a 330 Hz kernel, for both variants
for variant in ("swipe", "swipe_prime"):
    k = kernel_for(330.0, bank.freq_grid, variant)
    peaks = [h for h in range(1, 9) if k[np.argmin(np.abs(freqs - 330.0 * h))] > 0]
    print(f"{variant:12s} harmonics with a positive lobe (first 8): {peaks}")

# a sawtooth at 330 Hz; one frame in the middle of the clip
buf, _ = synth_signal("sawtooth", constant_curve(330.0, 0.5, FS), FS)
for variant in ("swipe", "swipe_prime"):
    b = default_bank(variant)
    z = score_frames(buf, [len(buf) // 2], b, ScorerConfig())[0]
    top = np.argsort(z)[::-1][:3]
    listing = ", ".join(f"{b.grid.candidates[i]:.1f} Hz ({z[i]:.3f})" for i in top)
    octave_below = int(np.argmin(np.abs(b.grid.candidates - 165.0)))
    print(f"{variant:12s} top candidates: {listing}; score at 165 Hz: {z[octave_below]:.3f}")

# The octave below scores lower with prime harmonics: its even harmonics
# (330, 660, ... Hz) no longer fall on lobes of its own kernel.
