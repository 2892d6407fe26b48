"""Audio and annotation I/O, synthetic test signals, noise and pitch shifting.

WAV files are parsed directly from their RIFF chunks so that malformed input
produces an error naming the offending chunk. Supported encodings are 16-bit
integer PCM and 32-bit IEEE float, either as plain ``fmt`` chunks or wrapped in
``WAVE_FORMAT_EXTENSIBLE``.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.signal import resample_poly

__all__ = [
    "AudioBuffer",
    "Annotation",
    "WavFormatError",
    "read_wav",
    "write_wav",
    "synth_signal",
    "constant_curve",
    "glide_curve",
    "vibrato_curve",
    "add_noise",
    "resample_shift",
    "read_annotation",
    "write_annotation",
    "write_track",
    "read_track",
    "frame_count",
]

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE
_RESAMPLE_MAX_DENOMINATOR = 1000


class WavFormatError(ValueError):
    """Raised when a file is not a WAV file this module can decode."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio samples with their sample rate.

    Attributes:
        samples: float64 array of amplitudes (nominally in [-1, 1])
        sample_rate: sampling rate in Hz
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Annotation:
    """A uniformly sampled f0 sequence; 0 Hz marks an unvoiced frame."""

    hop_seconds: float
    f0: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64)
        if f0.ndim != 1:
            raise ValueError("f0 must be 1-D")
        if not self.hop_seconds > 0:
            raise ValueError(f"hop_seconds must be positive, got {self.hop_seconds}")
        if np.any(~np.isfinite(f0)) or np.any(f0 < 0):
            raise ValueError("f0 values must be finite and >= 0")
        f0.setflags(write=False)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "hop_seconds", float(self.hop_seconds))

    def __len__(self) -> int:
        return len(self.f0)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.f0)) * self.hop_seconds

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0


def frame_count(n_samples: int, sample_rate: int, hop_seconds: float) -> int:
    """Number of frames centered at 0, hop, 2*hop, ... covering the signal.

    Equals ``ceil(duration / hop)``, with a small tolerance so that e.g.
    exactly 1 s at a 10 ms hop gives 100 frames.
    """
    hop_samples = hop_seconds * sample_rate
    return max(1, int(math.ceil(n_samples / hop_samples - 1e-9)))


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------

def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(
                f"chunk {chunk_id.decode('latin-1')!r} is truncated: "
                f"declares {size} bytes, {len(body)} present")
        yield chunk_id, body
        pos += 8 + size + (size & 1)


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file, averaging channels down to mono.

    16-bit samples are scaled by 1/32768.

    Raises:
        WavFormatError: on a malformed header, a missing or truncated chunk,
            or an unsupported encoding.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"malformed header: {len(data)} bytes is too short for a RIFF header")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavFormatError(f"malformed header: expected 'RIFF'/'WAVE', got {riff!r}/{wave!r}")

    fmt = None
    payload = None
    for chunk_id, body in _iter_chunks(data):
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            payload = body
    if fmt is None:
        raise WavFormatError("malformed header: no 'fmt ' chunk")
    if len(fmt) < 16:
        raise WavFormatError(f"'fmt ' chunk too short ({len(fmt)} bytes)")
    if payload is None:
        raise WavFormatError("no 'data' chunk")

    fmt_code, channels, sample_rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if fmt_code == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise WavFormatError("'fmt ' chunk declares WAVE_FORMAT_EXTENSIBLE but has no subformat")
        fmt_code = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1:
        raise WavFormatError(f"'fmt ' chunk declares {channels} channels")
    if sample_rate < 1:
        raise WavFormatError(f"'fmt ' chunk declares sample rate {sample_rate}")

    if fmt_code == _WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif fmt_code == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise WavFormatError(
            f"unsupported format in 'fmt ' chunk: format code {fmt_code:#06x}, "
            f"{bits} bits (supported: PCM 16-bit, IEEE float 32-bit)")
    if block_align != channels * dtype.itemsize:
        raise WavFormatError(
            f"'fmt ' chunk block_align {block_align} inconsistent with "
            f"{channels} channel(s) of {bits} bits")

    n_frames = len(payload) // block_align
    raw = np.frombuffer(payload[:n_frames * block_align], dtype=dtype)
    samples = raw.reshape(n_frames, channels).astype(np.float64) * scale
    return AudioBuffer(samples.mean(axis=1), sample_rate)


def write_wav(path: str | Path, buf: AudioBuffer,
              encoding: Literal["pcm16", "float32"] = "float32") -> None:
    """Write a mono WAV file. PCM16 output is clipped to [-1, 1)."""
    if encoding == "pcm16":
        q = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype("<i2")
        fmt_code, bits, payload = _WAVE_FORMAT_PCM, 16, q.tobytes()
    elif encoding == "float32":
        fmt_code, bits, payload = _WAVE_FORMAT_IEEE_FLOAT, 32, buf.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    fmt = struct.pack("<HHIIHH", fmt_code, 1, buf.sample_rate,
                      buf.sample_rate * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def constant_curve(f0: float, duration: float, sample_rate: int) -> np.ndarray:
    return np.full(int(round(duration * sample_rate)), float(f0))


def glide_curve(f_start: float, f_end: float, duration: float, sample_rate: int) -> np.ndarray:
    """Exponential glide from ``f_start`` to ``f_end``."""
    n = int(round(duration * sample_rate))
    return f_start * (f_end / f_start) ** (np.arange(n) / max(n - 1, 1))


def vibrato_curve(center: float, depth_cents: float, rate_hz: float,
                  duration: float, sample_rate: int) -> np.ndarray:
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return center * 2.0 ** (depth_cents / 1200.0 * np.sin(2 * np.pi * rate_hz * t))


def synth_signal(kind: Literal["sine", "sawtooth"], f0_curve, sample_rate: int,
                 amplitude: float = 0.5, hop_seconds: float = 0.01,
                 ) -> tuple[AudioBuffer, Annotation]:
    """Synthesize a phase-continuous sine or band-limited sawtooth.

    Args:
        kind: ``"sine"`` or ``"sawtooth"``
        f0_curve: instantaneous frequency per output sample, in Hz
        sample_rate: output rate in Hz
        amplitude: peak amplitude of the sine; for the sawtooth, the amplitude
            of the ideal (non band-limited) waveform, so Gibbs ripple can
            overshoot by about 9%
        hop_seconds: hop of the returned annotation

    Returns:
        the audio and an annotation holding the curve sampled at frame centers

    The sawtooth is additive: harmonic ``k`` has amplitude proportional to
    ``1/k`` and is only present while ``k * f0 < sample_rate / 2``.
    """
    f0 = np.asarray(f0_curve, dtype=np.float64)
    nyquist = sample_rate / 2
    if f0.ndim != 1 or len(f0) == 0:
        raise ValueError("f0_curve must be a non-empty 1-D sequence")
    if np.any(f0 <= 0) or np.any(f0 >= nyquist):
        raise ValueError(f"f0 values must lie in (0, {nyquist}) Hz")

    phase = np.mod(2 * np.pi * np.cumsum(f0) / sample_rate, 2 * np.pi)
    if kind == "sine":
        x = amplitude * np.sin(phase)
    elif kind == "sawtooth":
        # sin(k*p) by the Chebyshev recurrence, masked per sample at Nyquist
        kmax = np.ceil(nyquist / f0).astype(np.int64) - 1
        two_cos = 2 * np.cos(phase)
        s_prev = np.zeros_like(phase)
        s_cur = np.sin(phase)
        acc = s_cur.copy()
        for k in range(2, int(kmax.max()) + 1):
            s_prev, s_cur = s_cur, two_cos * s_cur - s_prev
            acc += np.where(kmax >= k, s_cur / k, 0.0)
        x = amplitude * (2 / np.pi) * acc
    else:
        raise ValueError(f"unknown signal kind {kind!r}")

    n_frames = frame_count(len(f0), sample_rate, hop_seconds)
    idx = np.minimum(np.round(np.arange(n_frames) * hop_seconds * sample_rate).astype(np.int64),
                     len(f0) - 1)
    return AudioBuffer(x, sample_rate), Annotation(hop_seconds, f0[idx])


# ---------------------------------------------------------------------------
# Noise and pitch shifting
# ---------------------------------------------------------------------------

def add_noise(buf: AudioBuffer, snr_db: float | None, seed: int | None = None) -> AudioBuffer:
    """Add white Gaussian noise at exactly ``snr_db`` (empirical powers).

    ``snr_db`` of ``None`` or ``+inf`` returns the input unchanged.
    """
    if snr_db is None or snr_db == math.inf:
        return buf
    p_signal = float(np.mean(buf.samples ** 2)) if len(buf) else 0.0
    if p_signal <= 0:
        raise ValueError("cannot add noise at a given SNR to a silent buffer")
    noise = np.random.default_rng(seed).standard_normal(len(buf))
    p_target = p_signal / 10 ** (snr_db / 10)
    noise *= math.sqrt(p_target / np.mean(noise ** 2))
    return AudioBuffer(buf.samples + noise, buf.sample_rate)


def _rational_ratio(ratio: float) -> tuple[int, int]:
    # up/down with up/down ~= 1/ratio; the approximation error is far below a cent
    frac = Fraction(1.0 / ratio).limit_denominator(_RESAMPLE_MAX_DENOMINATOR)
    return frac.numerator, frac.denominator


def resample_shift(buf: AudioBuffer, semitones: float) -> AudioBuffer:
    """Pitch-shift by resampling: every frequency is scaled by 2**(semitones/12).

    The output keeps the input's sample rate tag, so its duration shrinks
    (upward shifts) or grows (downward shifts) by the same ratio.
    """
    if abs(semitones) > 24:
        raise ValueError(f"|semitones| must be <= 24, got {semitones}")
    if semitones == 0:
        return buf
    ratio = 2.0 ** (semitones / 12.0)
    up, down = _rational_ratio(ratio)
    y = resample_poly(buf.samples, up, down, window=("kaiser", 8.0))
    return AudioBuffer(y, buf.sample_rate)


# ---------------------------------------------------------------------------
# Annotations and tracks
# ---------------------------------------------------------------------------

def _parse_rows(text: str, path) -> list[tuple[float, float]]:
    lines = text.splitlines()
    rows = []
    if lines and lines[0].strip().lower().startswith("time,"):
        # CSV track written by write_track: unvoiced frames read as 0 Hz
        for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
            if not row:
                continue
            try:
                t, f0, _, voiced = float(row[0]), float(row[1]), float(row[2]), int(row[3])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed track row {row!r}") from None
            rows.append((t, f0 if voiced else 0.0))
        return rows
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.replace(",", " ").split()
        if len(parts) < 2:
            raise ValueError(f"{path}:{lineno}: expected 'time f0', got {stripped!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric token in {stripped!r}") from None
    return rows


def _uniform_hop(times: np.ndarray, path) -> float:
    if len(times) < 2:
        raise ValueError(f"{path}: need at least two frames to infer the hop size")
    hop = times[1] - times[0]
    if hop <= 0:
        raise ValueError(f"{path}: timestamps must increase")
    jitter = np.abs(np.diff(times) - hop)
    if np.any(jitter > 0.01 * hop):
        bad = int(np.argmax(jitter > 0.01 * hop)) + 1
        raise ValueError(f"{path}: non-uniform timestamps near frame {bad} "
                         f"(step {times[bad] - times[bad - 1]:.6g} s vs hop {hop:.6g} s)")
    return float(hop)


def read_annotation(path: str | Path) -> Annotation:
    """Read a two-column ``time f0`` text file (0 Hz = unvoiced).

    The hop is the difference of the first two timestamps; deviations above
    1% anywhere in the file are rejected. Track CSVs produced by
    :func:`write_track` are accepted too.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = _parse_rows(text, path)
    if not rows:
        raise ValueError(f"{path}: empty annotation")
    arr = np.asarray(rows)
    hop = _uniform_hop(arr[:, 0], path)
    return Annotation(hop, arr[:, 1])


def write_annotation(path: str | Path, ann: Annotation) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t, f in zip(ann.times, ann.f0):
            fh.write(f"{t:.6f}\t{f:.6f}\n")


def write_track(path, track) -> None:
    """Write a pitch track as CSV ``time,f0,confidence,voiced``.

    ``path`` may also be an open text stream.
    """
    def emit(fh):
        fh.write("time,f0,confidence,voiced\n")
        times = np.arange(len(track.f0_hz)) * track.hop_seconds
        for t, f, c, v in zip(times, track.f0_hz, track.confidence, track.voiced):
            fh.write(f"{t:.6f},{f:.6f},{c:.6f},{int(bool(v))}\n")

    if hasattr(path, "write"):
        emit(path)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def read_track(path: str | Path):
    """Read a CSV written by :func:`write_track` back into a ``PitchTrack``."""
    from .tracker import PitchTrack

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip().lower() != "time,f0,confidence,voiced":
        raise ValueError(f"{path}: missing 'time,f0,confidence,voiced' header")
    rows = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        try:
            rows.append((float(row[0]), float(row[1]), float(row[2]), int(row[3])))
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{lineno}: malformed track row {row!r}") from None
    if not rows:
        raise ValueError(f"{path}: empty track")
    arr = np.asarray(rows)
    hop = _uniform_hop(arr[:, 0], path)
    return PitchTrack(hop, arr[:, 1], arr[:, 2], arr[:, 3].astype(bool))
