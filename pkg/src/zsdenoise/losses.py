"""Self-supervised loss assembly.

total = rec + lambda * reg, where rec is the four-term multi-scale L1
consistency loss over the downsampled/shuffled views (sum divided by 3)
and reg compares |DoG| edge responses of input and output. L1 terms reduce
by the mean over pixels.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import ops
from .autodiff import Tensor
from .model import forward_graph


@dataclass(frozen=True)
class LossConfig:
    reg_weight: float = 350.0  # lambda
    s1: float = 9.0
    s2: float = 10.0

    def __post_init__(self):
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be >= 0")
        if not 0 < self.s1 < self.s2:
            raise ValueError("DoG scales must satisfy 0 < s1 < s2")


ELS_MODES = ("els", "random", "none")


def shuffled_views(y, els_mode, shuffle_seed=0):
    """The two downsampled views with the configured shuffle applied."""
    g1, g2 = ops.downsample_pair(y)
    if els_mode == "els":
        return ops.els(g1), ops.els(g2)
    if els_mode == "random":
        return (
            ops.random_shuffle_2x2(g1, [shuffle_seed, 1]),
            ops.random_shuffle_2x2(g2, [shuffle_seed, 2]),
        )
    if els_mode == "none":
        return g1, g2
    raise ValueError(f"els_mode must be one of {ELS_MODES}, got {els_mode!r}")


class LossContext:
    """Per-image constants reused across epochs: shuffled views, DoG kernels,
    and the |DoG| of the noisy input."""

    def __init__(self, y, loss_cfg, els_mode="els", shuffle_seed=0):
        self.y = np.asarray(y, dtype=np.float64)
        self.cfg = loss_cfg
        self.e1, self.e2 = shuffled_views(self.y, els_mode, shuffle_seed)
        self.k1 = ops.gaussian_kernel_1d(loss_cfg.s1)
        self.k2 = ops.gaussian_kernel_1d(loss_cfg.s2)
        self.abs_dog_y = np.abs(ops.dog(self.y, loss_cfg.s1, loss_cfg.s2))


def _dog_graph(x, ctx):
    return ad.blur_reflect(x, ctx.k2) - ad.blur_reflect(x, ctx.k1)


def build_losses(theta, meta, ctx):
    """Reconstruction and regularization terms as an autodiff graph."""
    f_e1, _ = forward_graph(theta, meta, Tensor(ctx.e1))
    f_e2, _ = forward_graph(theta, meta, Tensor(ctx.e2))
    f_y, _ = forward_graph(theta, meta, Tensor(ctx.y))
    g1f = ad.downsample_g1(f_y)
    g2f = ad.downsample_g2(f_y)
    rec = (1.0 / 3.0) * (
        ad.mean_abs_diff(f_e1, f_e2)
        + ad.mean_abs_diff(f_e1, g1f)
        + ad.mean_abs_diff(f_e2, g2f)
        + ad.mean_abs_diff(g1f, g2f)
    )
    reg = ad.mean_abs_diff(Tensor(ctx.abs_dog_y), ad.absolute(_dog_graph(f_y, ctx)))
    return rec, reg


def build_total_loss(theta, meta, ctx):
    rec, reg = build_losses(theta, meta, ctx)
    return rec + ctx.cfg.reg_weight * reg


def reconstruction_loss(model, y, els_mode="els", shuffle_seed=0, loss_cfg=None):
    ctx = LossContext(y, loss_cfg or LossConfig(), els_mode, shuffle_seed)
    rec, _ = build_losses(Tensor(model.params), model.meta, ctx)
    return float(rec.data)


def regularization_loss(model, y, loss_cfg=None):
    ctx = LossContext(y, loss_cfg or LossConfig(), "none")
    _, reg = build_losses(Tensor(model.params), model.meta, ctx)
    return float(reg.data)


def total_loss(model, y, loss_cfg=None, els_mode="els", shuffle_seed=0):
    ctx = LossContext(y, loss_cfg or LossConfig(), els_mode, shuffle_seed)
    return float(build_total_loss(Tensor(model.params), model.meta, ctx).data)


def make_loss_fn(meta, ctx):
    """Loss as a function of the flat parameter Tensor (for gradient
    evaluation and the finite-difference oracle)."""

    def loss_fn(theta):
        if not isinstance(theta, Tensor):
            theta = Tensor(np.asarray(theta, dtype=np.float64))
            return float(build_total_loss(theta, meta, ctx).data)
        return build_total_loss(theta, meta, ctx)

    return loss_fn
