"""Per-image zero-shot training: AdamW on the flat parameter vector."""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .imageio import pad_to_multiple
from .losses import LossConfig, LossContext, make_loss_fn
from .model import ModelMeta, init_params

PAD_MODULUS = 16  # patch size 8 after one factor-2 downsample


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-2
    eps: float = 1e-8
    seed: int = 0
    els_mode: str = "els"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class TrainReport:
    loss_per_epoch: list = field(default_factory=list)
    wall_time: float = 0.0
    final_params_checksum: str = ""

    def to_dict(self, config=None):
        doc = {
            "loss": self.loss_per_epoch,
            "seconds": self.wall_time,
            "checksum": self.final_params_checksum,
        }
        if config is not None:
            doc["config"] = config
        return doc


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


def params_checksum(params):
    return hashlib.sha256(np.ascontiguousarray(params).tobytes()).hexdigest()


def adamw_init_state(n):
    return {"m": np.zeros(n), "v": np.zeros(n), "t": 0}


def adamw_step(params, grads, state, cfg):
    """One decoupled-weight-decay Adam update; returns (params', state')."""
    t = state["t"] + 1
    m = cfg.beta1 * state["m"] + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state["v"] + (1.0 - cfg.beta2) * grads * grads
    mhat = m / (1.0 - cfg.beta1**t)
    vhat = v / (1.0 - cfg.beta2**t)
    new = (
        params
        - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        - cfg.learning_rate * cfg.weight_decay * params
    )
    return new, {"m": m, "v": v, "t": t}


def train_single_image(
    y,
    train_cfg=None,
    loss_cfg=None,
    n_stages=2,
    patch_size=8,
    embed_dim=8,
    sigma_upper_bounds=None,
    on_epoch=None,
):
    """Optimize a fresh model on one image (padded internally to a multiple
    of 16); one full-batch step per epoch. Returns (model, report).

    on_epoch(epoch_index, loss) is called after every step.
    """
    train_cfg = train_cfg or TrainConfig()
    loss_cfg = loss_cfg or LossConfig()
    padded, _ = pad_to_multiple(np.asarray(y, dtype=np.float64), PAD_MODULUS)
    model = init_params(
        train_cfg.seed, patch_size, embed_dim, n_stages, sigma_upper_bounds
    )
    ctx = LossContext(padded, loss_cfg, train_cfg.els_mode, shuffle_seed=train_cfg.seed)
    loss_fn = make_loss_fn(model.meta, ctx)

    t0 = time.time()
    params = model.params
    state = adamw_init_state(params.size)
    losses = []
    for epoch in range(train_cfg.epochs):
        try:
            loss, grad = ad.evaluate_with_gradients(loss_fn, params)
        except ad.NonFiniteError as e:
            raise TrainingDiverged(epoch) from e
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDiverged(epoch)
        losses.append(loss)
        params, state = adamw_step(params, grad, state, train_cfg)
        if on_epoch is not None:
            on_epoch(epoch, loss)
    model.params = params
    report = TrainReport(
        loss_per_epoch=losses,
        wall_time=time.time() - t0,
        final_params_checksum=params_checksum(params),
    )
    return model, report


def lambda_grid(lo=200.0, hi=500.0, n=10):
    return np.linspace(lo, hi, n)
