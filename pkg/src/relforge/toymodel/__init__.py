from .features import FeatureVector, featurize
from .kernels import BACKEND
from .model import (
    DistillConfig,
    ModelParams,
    SmoothingConfig,
    ce_loss,
    ema_update,
    forward,
    kl_distill_loss,
    load_model,
    loss_and_grad,
    predict,
    save_model,
    smooth_labels,
    total_loss,
    train,
    train_step,
)

__all__ = [
    "BACKEND",
    "DistillConfig",
    "FeatureVector",
    "ModelParams",
    "SmoothingConfig",
    "ce_loss",
    "ema_update",
    "featurize",
    "forward",
    "kl_distill_loss",
    "load_model",
    "loss_and_grad",
    "predict",
    "save_model",
    "smooth_labels",
    "total_loss",
    "train",
    "train_step",
]
