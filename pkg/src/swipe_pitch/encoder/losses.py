"""Training objectives on output distributions and their gradients.

Every loss accepts distributions with arbitrary leading batch dimensions and
returns one value per batch element. The ``*_grad`` companions return the
partial derivatives with respect to each distribution argument, which
:func:`softmax_backward` turns into gradients on the logits.
"""
from __future__ import annotations

import numpy as np

from ..kernels import PitchGrid

__all__ = [
    "EPS",
    "phi",
    "phi_weights",
    "huber",
    "huber_grad",
    "loss_equivariance",
    "loss_equivariance_grad",
    "loss_sce",
    "loss_sce_grad",
    "loss_invariance",
    "loss_invariance_grad",
    "loss_ce",
    "loss_ce_grad",
    "gaussian_target",
    "softmax_backward",
]

EPS = 1e-9


def phi_weights(n: int, alpha: float) -> np.ndarray:
    """``(alpha, alpha**2, ..., alpha**n)``."""
    return alpha ** np.arange(1, n + 1, dtype=np.float64)


def phi(y, alpha: float):
    """Linear projection ``sum_i alpha**(i+1) * y[i]`` (0-based ``i``)."""
    y = np.asarray(y, dtype=np.float64)
    return y @ phi_weights(y.shape[-1], alpha)


def huber(r, delta: float = 1.0):
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * a * a, delta * (a - 0.5 * delta))


def huber_grad(r, delta: float = 1.0):
    return np.clip(r, -delta, delta)


def _equiv_residual(y, y_shift, k_bins, alpha):
    return phi(y_shift, alpha) - alpha ** np.asarray(k_bins, dtype=np.float64) * phi(y, alpha)


def loss_equivariance(y, y_shift, k_bins, alpha: float, delta: float = 1.0):
    """Huber penalty on ``phi(y_shift) - alpha**k_bins * phi(y)``.

    Zero exactly when the projections satisfy the transposition relation.
    """
    return huber(_equiv_residual(y, y_shift, k_bins, alpha), delta)


def loss_equivariance_grad(y, y_shift, k_bins, alpha: float, delta: float = 1.0):
    y = np.asarray(y, dtype=np.float64)
    r = _equiv_residual(y, y_shift, k_bins, alpha)
    g = huber_grad(r, delta)[..., None]
    w = phi_weights(y.shape[-1], alpha)
    scale = (alpha ** np.asarray(k_bins, dtype=np.float64))[..., None]
    return -g * scale * w, g * w


def _shift_mask(n: int, k_bins):
    # index map i -> i + k and a mask of in-range targets, per batch element
    k = np.asarray(k_bins, dtype=np.int64)[..., None]
    target = np.arange(n) + k
    valid = (target >= 0) & (target < n)
    return np.clip(target, 0, n - 1), valid


def loss_sce(y, y_shift, k_bins):
    """Shifted cross-entropy ``-sum_i y[i] * log(y_shift[i + k] + eps)``.

    Terms whose shifted index falls outside the output are dropped.
    """
    y = np.asarray(y, dtype=np.float64)
    y_shift = np.asarray(y_shift, dtype=np.float64)
    idx, valid = _shift_mask(y.shape[-1], k_bins)
    idx = np.broadcast_to(idx, y.shape)
    logq = np.log(np.take_along_axis(y_shift, idx, axis=-1) + EPS)
    return -np.sum(np.where(valid, y * logq, 0.0), axis=-1)


def loss_sce_grad(y, y_shift, k_bins):
    y = np.asarray(y, dtype=np.float64)
    y_shift = np.asarray(y_shift, dtype=np.float64)
    idx, valid = _shift_mask(y.shape[-1], k_bins)
    idx = np.broadcast_to(idx, y.shape)
    valid = np.broadcast_to(valid, y.shape)
    q = np.take_along_axis(y_shift, idx, axis=-1)
    g_y = np.where(valid, -np.log(q + EPS), 0.0)
    contrib = np.where(valid, -y / (q + EPS), 0.0)
    # scatter back onto the shifted positions (invalid terms add zero)
    n = y.shape[-1]
    flat_idx = idx.reshape(-1, n)
    rows = np.broadcast_to(np.arange(flat_idx.shape[0])[:, None], flat_idx.shape)
    g_shift = np.zeros((flat_idx.shape[0], n))
    np.add.at(g_shift, (rows, flat_idx), contrib.reshape(-1, n))
    return g_y, g_shift.reshape(y_shift.shape)


def loss_invariance(y, y_aug):
    """Cross-entropy ``-sum_i y[i] * log(y_aug[i] + eps)``."""
    y = np.asarray(y, dtype=np.float64)
    return -np.sum(y * np.log(np.asarray(y_aug, dtype=np.float64) + EPS), axis=-1)


def loss_invariance_grad(y, y_aug):
    y = np.asarray(y, dtype=np.float64)
    y_aug = np.asarray(y_aug, dtype=np.float64)
    return -np.log(y_aug + EPS), -y / (y_aug + EPS)


def loss_ce(target, y):
    """Cross-entropy of predictions ``y`` against a (blurred) target distribution."""
    return loss_invariance(target, y)


def loss_ce_grad(target, y):
    return loss_invariance_grad(target, y)[1]


def gaussian_target(f0_hz, grid: PitchGrid, sigma_bins: float = 1.0) -> np.ndarray:
    """Gaussian over candidate bins centered at the (fractional) bin of ``f0_hz``.

    ``sigma_bins == 0`` gives a one-hot vector at the nearest bin.
    """
    f0 = np.atleast_1d(np.asarray(f0_hz, dtype=np.float64))
    center = grid.hz_to_bin(f0)[:, None]
    bins = np.arange(len(grid))[None, :]
    if sigma_bins == 0:
        target = (bins == np.clip(np.round(center), 0, len(grid) - 1)).astype(np.float64)
    else:
        target = np.exp(-0.5 * ((bins - center) / sigma_bins) ** 2)
    target /= target.sum(axis=-1, keepdims=True)
    return target if np.ndim(f0_hz) else target[0]


def softmax_backward(y, grad_y):
    """Map ``dL/dy`` to ``dL/dz`` for ``y = softmax(z)``."""
    y = np.asarray(y, dtype=np.float64)
    return y * (grad_y - np.sum(y * grad_y, axis=-1, keepdims=True))
