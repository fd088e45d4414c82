"""Image file I/O and geometric preparation.

Images are 2-D float64 arrays with values nominally in [0, 1].
Supported formats: 8/16-bit grayscale PNG and raw little-endian float32
("rawf32") with a JSON sidecar ``{"width": W, "height": H, "dtype": "f32"}``
at ``<path>.json``.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

FORMATS = ("png8", "png16", "rawf32")


class ImageError(ValueError):
    pass


@dataclass(frozen=True)
class PadInfo:
    left: int
    right: int
    top: int
    bottom: int
    mode: str = "reflect"


@dataclass(frozen=True)
class RoiRect:
    """Pixel rectangle; x is the column axis, y the row axis, ends exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def validate(self, width, height):
        if not (0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height):
            raise ImageError(f"ROI {self} out of bounds for {width}x{height}")

    def slices(self):
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


def validate_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ImageError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ImageError("image contains non-finite values")
    return img


def load_image(path, fmt):
    if fmt not in FORMATS:
        raise ImageError(f"unknown format {fmt!r}")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if fmt == "rawf32":
        sidecar = path + ".json"
        if not os.path.exists(sidecar):
            raise ImageError(f"missing rawf32 sidecar {sidecar}")
        with open(sidecar) as f:
            desc = json.load(f)
        w, h = int(desc["width"]), int(desc["height"])
        data = np.fromfile(path, dtype="<f4")
        if data.size != w * h:
            raise ImageError(f"rawf32 length {data.size} != {w}x{h}")
        return np.clip(data.astype(np.float64).reshape(h, w), 0.0, 1.0)
    try:
        pil = PILImage.open(path)
        arr = np.asarray(pil)
    except Exception as e:
        raise ImageError(f"malformed image file {path}: {e}") from e
    if arr.ndim != 2:
        raise ImageError(f"expected grayscale PNG, got shape {arr.shape}")
    scale = 255.0 if fmt == "png8" else 65535.0
    return arr.astype(np.float64) / scale


def save_image(img, path, fmt):
    img = validate_image(img)
    if fmt == "rawf32":
        img.astype("<f4").tofile(path)
        with open(path + ".json", "w") as f:
            json.dump({"width": img.shape[1], "height": img.shape[0], "dtype": "f32"}, f)
        return
    clipped = np.clip(img, 0.0, 1.0)
    if fmt == "png8":
        arr = np.round(clipped * 255.0).astype(np.uint8)
        PILImage.fromarray(arr, mode="L").save(path, format="PNG")
    elif fmt == "png16":
        arr = np.round(clipped * 65535.0).astype(np.uint16)
        PILImage.fromarray(arr).save(path, format="PNG")
    else:
        raise ImageError(f"unknown format {fmt!r}")


def pad_to_multiple(img, modulus):
    """Reflect-pad so both dims are the smallest multiples of modulus,
    splitting as evenly as possible with the extra pixel on right/bottom."""
    img = validate_image(img)
    if modulus < 1:
        raise ImageError("modulus must be >= 1")
    H, W = img.shape
    ph = (-H) % modulus
    pw = (-W) % modulus
    top, left = ph // 2, pw // 2
    bottom, right = ph - top, pw - left
    if (ph or pw) and (H < 2 or W < 2):
        raise ImageError("image too small for reflect padding")
    padded = np.pad(img, ((top, bottom), (left, right)), mode="reflect")
    return padded, PadInfo(left=left, right=right, top=top, bottom=bottom)


def crop_with(img, pad):
    H, W = img.shape
    return img[pad.top : H - pad.bottom, pad.left : W - pad.right]
