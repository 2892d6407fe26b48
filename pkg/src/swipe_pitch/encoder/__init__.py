"""Tiny Toeplitz encoder over SWIPE scores: model, losses, augmentation, training."""
from .augment import AugmentConfig, augment, random_fir
from .losses import (
    gaussian_target,
    loss_ce,
    loss_equivariance,
    loss_invariance,
    loss_sce,
    phi,
)
from .model import (
    N_BINS,
    N_TAPS,
    ToeplitzEncoder,
    entropy,
    forward,
    identity_taps,
    load_weights,
    save_weights,
    softmax,
    voicing_from_entropy,
)
from .training import (
    Adam,
    TrainConfig,
    TrainingDiverged,
    encoder_scores_to_track,
    track_with_encoder,
    train_self_supervised,
    train_supervised,
)

__all__ = [
    "AugmentConfig", "augment", "random_fir",
    "gaussian_target", "loss_ce", "loss_equivariance", "loss_invariance", "loss_sce", "phi",
    "N_BINS", "N_TAPS", "ToeplitzEncoder", "entropy", "forward", "identity_taps",
    "load_weights", "save_weights", "softmax", "voicing_from_entropy",
    "Adam", "TrainConfig", "TrainingDiverged", "encoder_scores_to_track",
    "track_with_encoder", "train_self_supervised", "train_supervised",
]
