"""SWIPE-style pitch estimation with prime-harmonic kernels, a tiny Toeplitz encoder,
and a frame-level evaluation harness."""

from .audio_io import Annotation, AudioBuffer, read_annotation, read_wav, synth_signal, write_wav
from .kernels import KernelBank, PitchGrid, build_kernel_bank, build_pitch_grid
from .metrics import EvalReport, evaluate
from .scorer import ScorerConfig, score_frames, score_track
from .spectral import FrequencyGrid, build_grid
from .tracker import PitchTrack, track

__version__ = "0.1.0"


def default_bank(variant: str = "swipe_prime", scale: str = "mel_slaney",
                 f_min: float = 27.5, f_max: float = 8055.0,
                 bins_per_semitone: int = 3) -> KernelBank:
    """Kernel bank over the default pitch grid and a frequency grid spanning
    a quarter of ``f_min`` to 1.25 times ``f_max``."""
    grid = build_pitch_grid(f_min, f_max, bins_per_semitone)
    return build_kernel_bank(grid, build_grid(scale, 0.25 * f_min, 1.25 * f_max), variant)


__all__ = [
    "Annotation", "AudioBuffer", "read_annotation", "read_wav", "synth_signal", "write_wav",
    "KernelBank", "PitchGrid", "build_kernel_bank", "build_pitch_grid",
    "EvalReport", "evaluate", "ScorerConfig", "score_frames", "score_track",
    "FrequencyGrid", "build_grid", "PitchTrack", "track", "default_bank",
]
