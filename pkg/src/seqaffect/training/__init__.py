from .loop import EpochStats, TrainConfig, TrainResult, evaluate_partition, predict_sequence, train, train_model
from .losses import ccc_loss, l1_loss, mse_loss, multitask_loss
from .multimodal import early_fuse, late_fuse
from .optim import Adam, PlateauScheduler, clip_grad_norm

__all__ = [
    "Adam",
    "EpochStats",
    "PlateauScheduler",
    "TrainConfig",
    "TrainResult",
    "ccc_loss",
    "clip_grad_norm",
    "early_fuse",
    "evaluate_partition",
    "l1_loss",
    "late_fuse",
    "mse_loss",
    "multitask_loss",
    "predict_sequence",
    "train",
    "train_model",
]
