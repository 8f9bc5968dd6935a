"""Core pixel-field primitives: masked projection, mask inversion, mask
downsampling, and the PNG boundary conventions.

Conventions used everywhere in this package:

* an image is a torch tensor of shape (3, H, W), values in [-1, 1]
* a mask is a torch tensor of shape (H, W), values exactly 0 or 1
* a feature mask is a torch tensor of shape (h, w), values in [0, 1],
  produced by area-averaged downsampling of a binary mask

All functions here are pure; nothing is modified in place.
"""

from __future__ import annotations

import io

import numpy as np
import torch
from PIL import Image

from .errors import DimensionMismatch, EmptyMask


def validate_image(x: torch.Tensor) -> torch.Tensor:
    if x.ndim != 3 or x.shape[0] != 3:
        raise DimensionMismatch(f"expected image of shape (3, H, W), got {tuple(x.shape)}")
    if not torch.isfinite(x).all():
        raise DimensionMismatch("image contains non-finite values")
    return x


def validate_mask(m: torch.Tensor) -> torch.Tensor:
    if m.ndim != 2:
        raise DimensionMismatch(f"expected mask of shape (H, W), got {tuple(m.shape)}")
    if not torch.logical_or(m == 0, m == 1).all():
        raise DimensionMismatch("mask values must be exactly 0 or 1")
    return m


def require_nonempty(m: torch.Tensor) -> torch.Tensor:
    if float(m.sum()) == 0.0:
        raise EmptyMask("mask selects no pixels")
    return m


def masked_project(x: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
    """Zero the image outside the mask: out[p] = x[p] * m[p], broadcast over channels."""
    if x.shape[-2:] != m.shape:
        raise DimensionMismatch(
            f"image spatial dims {tuple(x.shape[-2:])} != mask dims {tuple(m.shape)}"
        )
    return x * m.to(x.dtype).unsqueeze(0)


def invert_mask(m: torch.Tensor) -> torch.Tensor:
    """Binary complement 1 - m."""
    validate_mask(m)
    return 1.0 - m


def _overlap_matrix(n_out: int, n_in: int, dtype: torch.dtype) -> torch.Tensor:
    """Row i holds the fraction of output cell i covered by each input pixel.

    Output cell i spans [i*s, (i+1)*s) in input coordinates with s = n_in/n_out.
    Rows sum to 1, so the product is an exact fractional-area average. For the
    evenly-divisible case this reduces to plain block averaging.
    """
    s = n_in / n_out
    a = torch.zeros(n_out, n_in, dtype=dtype)
    for i in range(n_out):
        lo, hi = i * s, (i + 1) * s
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            a[i, j] = max(0.0, min(hi, j + 1) - max(lo, j)) / s
    return a


def downsample_mask(m: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Area-average a binary image-resolution mask down to a soft feature mask."""
    h, w = m.shape
    if target_h > h or target_w > w or target_h < 1 or target_w < 1:
        raise DimensionMismatch(
            f"target {target_h}x{target_w} exceeds mask dims {h}x{w}"
        )
    if (target_h, target_w) == (h, w):
        return m.clone()
    ah = _overlap_matrix(target_h, h, m.dtype)
    aw = _overlap_matrix(target_w, w, m.dtype)
    out = ah @ m @ aw.T
    return out.clamp(0.0, 1.0)


# --- PNG boundary -----------------------------------------------------------
# 8-bit RGB PNG <-> [-1, 1] image, linear map; 8-bit gray PNG <-> binary mask,
# value >= 128 maps to 1.


def image_to_png_bytes(x: torch.Tensor) -> bytes:
    validate_image(x)
    u8 = ((x.detach().to(torch.float64) + 1.0) * 0.5 * 255.0).round().clamp(0, 255)
    arr = u8.to(torch.uint8).permute(1, 2, 0).numpy()
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data: bytes, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    arr = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"), dtype=np.float64)
    x = torch.from_numpy(arr / 255.0 * 2.0 - 1.0).permute(2, 0, 1)
    return x.to(dtype)


def mask_to_png_bytes(m: torch.Tensor) -> bytes:
    validate_mask(m)
    arr = (m.detach().numpy() * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_mask(data: bytes, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    arr = np.asarray(Image.open(io.BytesIO(data)).convert("L"))
    return torch.from_numpy((arr >= 128).astype(np.float64)).to(dtype)
