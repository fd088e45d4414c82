"""Zero-shot single-image denoiser built on a spatially adaptive,
attention-parameterized bilateral filter, trained self-supervisedly on one
grayscale image."""

from .imageio import PadInfo, RoiRect, crop_with, load_image, pad_to_multiple, save_image
from .losses import LossConfig, reconstruction_loss, regularization_loss, total_loss
from .model import (
    DenoiserModel,
    ModelMeta,
    SigmaEdit,
    SigmaMaps,
    apply_sigma_edit,
    denoise,
    init_params,
    kernel_halfwidth,
    load_checkpoint,
    param_count,
    refilter,
    save_checkpoint,
)
from .train import TrainConfig, TrainReport, train_single_image

__all__ = [
    "PadInfo",
    "RoiRect",
    "crop_with",
    "load_image",
    "pad_to_multiple",
    "save_image",
    "LossConfig",
    "reconstruction_loss",
    "regularization_loss",
    "total_loss",
    "DenoiserModel",
    "ModelMeta",
    "SigmaEdit",
    "SigmaMaps",
    "apply_sigma_edit",
    "denoise",
    "init_params",
    "kernel_halfwidth",
    "load_checkpoint",
    "param_count",
    "refilter",
    "save_checkpoint",
    "TrainConfig",
    "TrainReport",
    "train_single_image",
]

__version__ = "0.1.0"
