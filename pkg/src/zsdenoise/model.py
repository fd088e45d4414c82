"""The adaptive bilateral denoiser: dual-attention sigma prediction, the
spatially varying filter, stage cascading, checkpoints, and sigma-map
editing.

Parameters live in one flat float64 vector with a fixed layout (see
PARAM_FIELDS); training and gradient evaluation operate on that vector.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backend import get_kernels
from .imageio import RoiRect, save_image

CHECKPOINT_VERSION = 1

# per-stage fields: name -> shape builder given (patch_size P, embed_dim d)
PARAM_FIELDS = [
    ("Wq", lambda P, d: (P * P, d)),
    ("Wk", lambda P, d: (P * P, d)),
    ("Wv", lambda P, d: (P * P, d)),
    ("Wq_sigma", lambda P, d: (d, d)),
    ("Wk_sigma", lambda P, d: (d, d)),
    ("Wv_sigma", lambda P, d: (d, d)),
    ("ln_scale", lambda P, d: (d,)),
    ("ln_shift", lambda P, d: (d,)),
    # head columns are ordered (sigma_r, sigma_x, sigma_y)
    ("head_w", lambda P, d: (d, 3)),
    ("head_b", lambda P, d: (3,)),
]


@dataclass(frozen=True)
class ModelMeta:
    patch_size: int = 8
    embed_dim: int = 8
    n_stages: int = 2
    sigma_upper_bounds: tuple | None = None  # (r, x, y) caps

    def __post_init__(self):
        if not 1 <= self.n_stages <= 3:
            raise ValueError("stage count must be in 1..3")


def stage_param_count(meta):
    return sum(
        int(np.prod(shape(meta.patch_size, meta.embed_dim))) for _, shape in PARAM_FIELDS
    )


def param_count(meta):
    return meta.n_stages * stage_param_count(meta)


def param_layout(meta):
    """Stable (stage, name, offset, shape) segments of the flat vector."""
    layout = []
    off = 0
    for s in range(meta.n_stages):
        for name, shape_fn in PARAM_FIELDS:
            shape = shape_fn(meta.patch_size, meta.embed_dim)
            n = int(np.prod(shape))
            layout.append((s, name, off, shape))
            off += n
    return layout


@dataclass
class DenoiserModel:
    meta: ModelMeta
    params: np.ndarray  # flat float64, length param_count(meta)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (param_count(self.meta),):
            raise ValueError(
                f"parameter vector length {self.params.size} != {param_count(self.meta)}"
            )
        if not np.all(np.isfinite(self.params)):
            raise ValueError("non-finite model parameters")

    def stage_arrays(self, stage):
        out = {}
        for s, name, off, shape in param_layout(self.meta):
            if s == stage:
                out[name] = self.params[off : off + int(np.prod(shape))].reshape(shape)
        return out


@dataclass
class SigmaMaps:
    """Per-patch (sigma_r, sigma_x, sigma_y) for one filter stage."""

    sigma_r: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray

    @property
    def grid(self):
        return self.sigma_r.shape

    def copy(self):
        return SigmaMaps(self.sigma_r.copy(), self.sigma_x.copy(), self.sigma_y.copy())


@dataclass
class SigmaEdit:
    stage: int
    region: RoiRect
    multiplier_r: float = 1.0
    multiplier_x: float = 1.0
    multiplier_y: float = 1.0
    clamp_max: dict = field(default_factory=dict)  # optional keys r, x, y

    def validate(self):
        for m in (self.multiplier_r, self.multiplier_x, self.multiplier_y):
            if not (m > 0):
                raise ValueError("sigma multipliers must be positive")


def softplus_inverse(y):
    return math.log(math.expm1(y))


def init_params(seed, patch_size=8, embed_dim=8, n_stages=2, sigma_upper_bounds=None):
    """Fresh model: Xavier-uniform projections, identity layer norm, zero head
    weights, head biases chosen so the initial filter is mild
    (sigma_r = 0.05 intensity units, sigma_x = sigma_y = 1.0 px)."""
    meta = ModelMeta(patch_size, embed_dim, n_stages, sigma_upper_bounds)
    rng = np.random.default_rng(seed)
    parts = []
    for _s, name, _off, shape in param_layout(meta):
        if name in ("Wq", "Wk", "Wv", "Wq_sigma", "Wk_sigma", "Wv_sigma"):
            a = math.sqrt(6.0 / (shape[0] + shape[1]))
            parts.append(rng.uniform(-a, a, size=shape).ravel())
        elif name == "ln_scale":
            parts.append(np.ones(shape).ravel())
        elif name in ("ln_shift", "head_w"):
            parts.append(np.zeros(shape).ravel())
        elif name == "head_b":
            parts.append(
                np.array(
                    [softplus_inverse(0.05), softplus_inverse(1.0), softplus_inverse(1.0)]
                )
            )
        else:  # pragma: no cover
            raise AssertionError(name)
    return DenoiserModel(meta, np.concatenate(parts))


def kernel_halfwidth(sigma_x, sigma_y):
    """Adaptive window half-width: 2 * ceil(max(sigma_x, sigma_y) + 1)."""
    return int(2 * math.ceil(max(sigma_x, sigma_y) + 1.0))


def scaled_dot_product_attention(Q, K, V):
    """softmax(Q K^T / sqrt(d)) V on plain arrays."""
    out = _attention(Tensor(Q), Tensor(K), Tensor(V))
    return out.data


def _attention(Q, K, V):
    d = Q.data.shape[1]
    logits = (1.0 / math.sqrt(d)) * (Q @ _transpose(K))
    return ad.softmax_rows(logits) @ V


def _transpose(t):
    out = Tensor(t.data.T, parents=(t,), op="T")
    out._backward = lambda g: t._accum(g.T)
    return out


def _stage_sigmas(x_img, seg, meta):
    """Dual-attention sigma prediction for one stage (autodiff graph)."""
    P = meta.patch_size
    patches = ad.extract_patches(x_img, P)
    feats = _attention(patches @ seg["Wq"], patches @ seg["Wk"], patches @ seg["Wv"])
    attn = _attention(
        feats @ seg["Wq_sigma"], feats @ seg["Wk_sigma"], feats @ seg["Wv_sigma"]
    )
    normed = ad.layer_norm_rows(attn, seg["ln_scale"], seg["ln_shift"], eps=1e-5)
    pre = normed @ seg["head_w"] + seg["head_b"]
    sig = ad.softplus(pre)
    H, W = x_img.data.shape
    gh, gw = H // P, W // P
    chans = []
    bounds = meta.sigma_upper_bounds
    for c in range(3):
        chan = sig[:, c].reshape(gh, gw)
        if bounds is not None and bounds[c] is not None:
            chan = ad.clamp_max(chan, float(bounds[c]))
        chans.append(chan)
    return chans  # [sigma_r, sigma_x, sigma_y]


def _stage_segments(theta, meta, stage):
    seg = {}
    for s, name, off, shape in param_layout(meta):
        if s == stage:
            n = int(np.prod(shape))
            seg[name] = theta[off : off + n].reshape(shape)
    return seg


def forward_graph(theta, meta, img):
    """Full multi-stage forward as an autodiff graph.

    theta: flat parameter Tensor; img: image Tensor.
    Returns (output Tensor, list of per-stage sigma Tensor triples).
    """
    x = img
    all_sigmas = []
    for s in range(meta.n_stages):
        seg = _stage_segments(theta, meta, s)
        sr, sx, sy = _stage_sigmas(x, seg, meta)
        x = ad.bilateral(x, sr, sx, sy, meta.patch_size)
        all_sigmas.append((sr, sx, sy))
    return x, all_sigmas


def predict_sigmas(stage_input, model, stage=0):
    """Sigma maps one stage would predict for the given stage input."""
    theta = Tensor(model.params)
    seg = _stage_segments(theta, model.meta, stage)
    sr, sx, sy = _stage_sigmas(Tensor(np.asarray(stage_input, dtype=np.float64)), seg, model.meta)
    return SigmaMaps(sr.data, sx.data, sy.data)


def denoise(image, model):
    """Run the stage cascade; returns (denoised image, per-stage sigma maps)."""
    image = np.asarray(image, dtype=np.float64)
    out, sigmas = forward_graph(Tensor(model.params), model.meta, Tensor(image))
    maps = [SigmaMaps(sr.data, sx.data, sy.data) for sr, sx, sy in sigmas]
    return out.data, maps


def refilter(image, model, maps):
    """Run the stage cascade with the supplied sigma maps verbatim (no
    attention forward pass)."""
    if len(maps) != model.meta.n_stages:
        raise ValueError(
            f"got {len(maps)} sigma maps for a {model.meta.n_stages}-stage model"
        )
    kern = get_kernels()
    P = model.meta.patch_size
    x = np.asarray(image, dtype=np.float64)
    for m in maps:
        if np.any(m.sigma_r <= 0) or np.any(m.sigma_x <= 0) or np.any(m.sigma_y <= 0):
            raise ValueError("sigma maps must be strictly positive")
        kgrid = (2.0 * np.ceil(np.maximum(m.sigma_x, m.sigma_y) + 1.0)).astype(np.int64)
        x, _ = kern.bilateral_forward(x, m.sigma_r, m.sigma_x, m.sigma_y, kgrid, P)
    return x


def apply_sigma_edit(maps, edit, patch_size):
    """Multiply sigma channels of every patch whose footprint intersects the
    edit region; optionally clamp. Returns new maps."""
    edit.validate()
    gh, gw = maps.grid
    edit.region.validate(gw * patch_size, gh * patch_size)
    r = edit.region
    pi0, pi1 = r.y0 // patch_size, (r.y1 - 1) // patch_size + 1
    pj0, pj1 = r.x0 // patch_size, (r.x1 - 1) // patch_size + 1
    out = maps.copy()
    sl = (slice(pi0, pi1), slice(pj0, pj1))
    for chan, mult in (
        ("sigma_r", edit.multiplier_r),
        ("sigma_x", edit.multiplier_x),
        ("sigma_y", edit.multiplier_y),
    ):
        arr = getattr(out, chan)
        arr[sl] *= mult
        cap = edit.clamp_max.get(chan.split("_")[1])
        if cap is not None:
            arr[sl] = np.minimum(arr[sl], float(cap))
    return out


# -- persistence -------------------------------------------------------------


def save_checkpoint(model, path):
    stages = []
    for s in range(model.meta.n_stages):
        arrs = model.stage_arrays(s)
        stages.append({name: arrs[name].ravel().tolist() for name, _ in PARAM_FIELDS})
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "patch_size": model.meta.patch_size,
        "embed_dim": model.meta.embed_dim,
        "stages": stages,
    }
    if model.meta.sigma_upper_bounds is not None:
        doc["sigma_upper_bounds"] = list(model.meta.sigma_upper_bounds)
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')}")
    bounds = doc.get("sigma_upper_bounds")
    meta = ModelMeta(
        patch_size=int(doc["patch_size"]),
        embed_dim=int(doc["embed_dim"]),
        n_stages=len(doc["stages"]),
        sigma_upper_bounds=tuple(bounds) if bounds is not None else None,
    )
    parts = []
    for s, stage in enumerate(doc["stages"]):
        for name, shape_fn in PARAM_FIELDS:
            shape = shape_fn(meta.patch_size, meta.embed_dim)
            arr = np.asarray(stage[name], dtype=np.float64)
            if arr.size != int(np.prod(shape)):
                raise ValueError(f"stage {s} field {name}: bad length {arr.size}")
            parts.append(arr)
    return DenoiserModel(meta, np.concatenate(parts))


def save_sigma_maps(maps, stage, dirpath, prefix="sigma"):
    """Export one stage's maps as JSON plus an 8-bit heatmap PNG per channel
    (linear [min, max] -> [0, 255]; min/max recorded in a JSON sidecar)."""
    os.makedirs(dirpath, exist_ok=True)
    gh, gw = maps.grid
    doc = {
        "stage": stage,
        "grid": [gh, gw],
        "sigma_r": maps.sigma_r.ravel().tolist(),
        "sigma_x": maps.sigma_x.ravel().tolist(),
        "sigma_y": maps.sigma_y.ravel().tolist(),
    }
    base = os.path.join(dirpath, f"{prefix}_stage{stage}")
    with open(base + ".json", "w") as f:
        json.dump(doc, f)
    for chan in ("sigma_r", "sigma_x", "sigma_y"):
        arr = getattr(maps, chan)
        lo, hi = float(arr.min()), float(arr.max())
        scaled = np.zeros_like(arr) if hi == lo else (arr - lo) / (hi - lo)
        png = f"{base}_{chan}.png"
        save_image(scaled, png, "png8")
        with open(png + ".json", "w") as f:
            json.dump({"min": lo, "max": hi}, f)


def load_sigma_maps(path):
    with open(path) as f:
        doc = json.load(f)
    gh, gw = doc["grid"]
    return SigmaMaps(
        np.asarray(doc["sigma_r"]).reshape(gh, gw),
        np.asarray(doc["sigma_x"]).reshape(gh, gw),
        np.asarray(doc["sigma_y"]).reshape(gh, gw),
    ), int(doc["stage"])
