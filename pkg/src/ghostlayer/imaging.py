"""Image I/O and preprocessing: PNG decode/encode, grayscale, negative
inversion, bilinear resize, tensor conversion, and pixel-space ensemble
averaging.

Images are numpy uint8 arrays of shape (height, width, 3), row-major RGB.
"""

from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigurationError, FormatError, UsageError
from .ops import Tensor

ImageBuffer = np.ndarray  # (H, W, 3) uint8


def _check_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ConfigurationError(
            f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}"
        )


def _round_half_away(values: np.ndarray) -> np.ndarray:
    # values are non-negative after clamping, so floor(v + 0.5) is
    # round-half-away-from-zero
    return np.floor(values + 0.5)


def decode(path) -> ImageBuffer:
    """Read an 8-bit PNG as RGB; grayscale is promoted, alpha discarded."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise FormatError(
                    f"{path}: unsupported bit depth (mode {im.mode}), need 8-bit"
                )
            if im.mode not in ("RGB", "RGBA", "L", "LA", "P"):
                raise FormatError(f"{path}: unsupported image mode {im.mode}")
            rgb = im.convert("RGB")
            return np.asarray(rgb, dtype=np.uint8).copy()
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a decodable image") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def encode(img: ImageBuffer, path) -> None:
    """Write a PNG; output bytes are deterministic for identical pixels."""
    _check_image(img)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def encode_bytes(img: ImageBuffer) -> bytes:
    _check_image(img)
    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """Rec. 601 luma, replicated to all three channels."""
    _check_image(img)
    weights = np.array([0.299, 0.587, 0.114])
    y = _round_half_away(img.astype(np.float64) @ weights)
    y = np.clip(y, 0, 255).astype(np.uint8)
    return np.repeat(y[:, :, None], 3, axis=2)


def invert(img: ImageBuffer) -> ImageBuffer:
    _check_image(img)
    return (255 - img.astype(np.int16)).astype(np.uint8)


def resize(img: ImageBuffer, target_w: int, target_h: int) -> ImageBuffer:
    """Bilinear resize with edge-clamped sampling; exact identity when the
    target equals the source size."""
    _check_image(img)
    if target_w < 1 or target_h < 1:
        raise ConfigurationError(f"invalid target size {target_w}x{target_h}")
    h, w = img.shape[:2]
    if (target_w, target_h) == (w, h):
        return img.copy()
    # sample at pixel centers, clamped to the source grid
    xs = (np.arange(target_w) + 0.5) * (w / target_w) - 0.5
    ys = (np.arange(target_h) + 0.5) * (h / target_h) - 0.5
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(int)
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    src = img.astype(np.float64)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(_round_half_away(out), 0, 255).astype(np.uint8)


def to_tensor(img: ImageBuffer, preprocess_mean) -> Tensor:
    """(H, W, 3) uint8 -> mean-subtracted float32 (1, 3, H, W)."""
    _check_image(img)
    mean = np.asarray(preprocess_mean, dtype=np.float64)
    chw = img.astype(np.float64).transpose(2, 0, 1) - mean[:, None, None]
    return chw[None].astype(np.float32)


def from_tensor(t: Tensor, preprocess_mean) -> ImageBuffer:
    """Add the mean back, clamp to [0, 255], round half away from zero."""
    if t.ndim != 4 or t.shape[0] != 1 or t.shape[1] != 3:
        raise ConfigurationError(f"expected 1x3xHxW tensor, got shape {t.shape}")
    mean = np.asarray(preprocess_mean, dtype=np.float64)
    hwc = t[0].astype(np.float64).transpose(1, 2, 0) + mean[None, None, :]
    return np.clip(_round_half_away(hwc), 0, 255).astype(np.uint8)


def ensemble_mean(images: list[ImageBuffer]) -> ImageBuffer:
    """Pixelwise arithmetic mean of the ensemble members."""
    if not images:
        raise UsageError("ensemble mean needs at least one image")
    for img in images:
        _check_image(img)
        if img.shape != images[0].shape:
            raise ConfigurationError(
                f"ensemble image shapes differ: {img.shape} vs {images[0].shape}"
            )
    total = np.zeros(images[0].shape, dtype=np.int64)
    for img in images:
        total += img
    mean = total / len(images)
    return np.clip(_round_half_away(mean), 0, 255).astype(np.uint8)
