"""The Toeplitz ("tiny") encoder: one 1-D convolution filter plus softmax."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "N_BINS",
    "N_TAPS",
    "ToeplitzEncoder",
    "identity_taps",
    "init_taps",
    "softmax",
    "toeplitz_logits",
    "taps_gradient",
    "forward",
    "entropy",
    "voicing_from_entropy",
    "save_weights",
    "load_weights",
]

N_BINS = 295
N_TAPS = 647

_MAGIC = b"SWTE"
_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class ToeplitzEncoder:
    """Single-filter convolution over score vectors, zero-padded to keep the length.

    Equivalent to a fully-connected layer whose weight matrix is Toeplitz, so
    a translated input gives a translated output away from the borders.
    """

    taps: np.ndarray
    in_bins: int = N_BINS
    out_bins: int = N_BINS

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 1 or len(taps) % 2 == 0:
            raise ValueError(f"taps must be a 1-D array of odd length, got shape {taps.shape}")
        if self.out_bins != self.in_bins:
            raise ValueError("only equal input and output resolution is supported")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def n_params(self) -> int:
        return len(self.taps)

    def logits(self, scores) -> np.ndarray:
        return toeplitz_logits(scores, self.taps)

    def __call__(self, scores) -> np.ndarray:
        return softmax(self.logits(scores))


def identity_taps(n_taps: int = N_TAPS) -> np.ndarray:
    taps = np.zeros(n_taps)
    taps[n_taps // 2] = 1.0
    return taps


def init_taps(rng: np.random.Generator, n_taps: int = N_TAPS, noise: float = 1e-3) -> np.ndarray:
    """Centered delta plus small Gaussian noise."""
    return identity_taps(n_taps) + noise * rng.standard_normal(n_taps)


def softmax(z, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _windows(scores: np.ndarray, n_taps: int) -> np.ndarray:
    half = n_taps // 2
    pad = [(0, 0)] * (scores.ndim - 1) + [(half, half)]
    return sliding_window_view(np.pad(scores, pad), n_taps, axis=-1)


def toeplitz_logits(scores, taps) -> np.ndarray:
    """``z[j] = sum_m taps[m] * s[j + m - half]`` with zeros outside the input.

    ``scores`` may carry leading batch dimensions.
    """
    scores = np.asarray(scores, dtype=np.float64)
    return _windows(scores, len(taps)) @ np.asarray(taps, dtype=np.float64)


def taps_gradient(scores, grad_logits, n_taps: int = N_TAPS) -> np.ndarray:
    """Gradient w.r.t. the taps given ``dL/dz``, summed over any batch dimensions."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[-1]
    win = _windows(scores.reshape(-1, n), n_taps)
    g = np.asarray(grad_logits, dtype=np.float64).reshape(-1, n)
    return np.einsum("bjm,bj->m", win, g)


def forward(scores, enc: ToeplitzEncoder) -> np.ndarray:
    """Probability vector(s) over the output bins."""
    return enc(scores)


def entropy(y, eps: float = 1e-12) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return -np.sum(y * np.log(y + eps), axis=-1)


def voicing_from_entropy(y, threshold_nats: float):
    """Voiced iff the entropy of ``y`` is below ``threshold_nats``."""
    return entropy(y) < threshold_nats


def save_weights(enc: ToeplitzEncoder, path: str | Path) -> None:
    """Little-endian: magic, version, in_bins, out_bins, tap count, float64 taps."""
    header = _HEADER.pack(_MAGIC, _VERSION, enc.in_bins, enc.out_bins, len(enc.taps))
    Path(path).write_bytes(header + enc.taps.astype("<f8").tobytes())


def load_weights(path: str | Path) -> ToeplitzEncoder:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated weight file ({len(data)} bytes)")
    magic, version, in_bins, out_bins, n_taps = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported weight format version {version}")
    expected = _HEADER.size + 8 * n_taps
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {n_taps} taps, got {len(data)}")
    taps = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return ToeplitzEncoder(taps, in_bins, out_bins)
