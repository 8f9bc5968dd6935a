"""Procedural colored-shapes world: squares, circles and triangles in ten
named colors on a mid-gray background (gray = 0 in the internal [-1, 1]
range). Used as the training corpus for the toy generator and as ground
truth geometry in tests and studies.

A latent vector deterministically encodes scene parameters (color mixture,
shape class, position, size) through `params_from_z`, so the toy generator
can be trained as a decoder of its own latent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

COLOR_NAMES = ["red", "green", "blue", "yellow", "purple",
               "orange", "white", "black", "brown", "gray"]
COLOR_RGB01 = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.5, 0.0, 0.5],
    [1.0, 0.65, 0.0],
    [1.0, 1.0, 1.0],
    [0.0, 0.0, 0.0],
    [0.6, 0.3, 0.0],
    [0.5, 0.5, 0.5],
])
SHAPE_NAMES = ["square", "circle", "triangle"]

LATENT_DIM = 64


@dataclass(frozen=True)
class SceneParams:
    rgb01: np.ndarray          # (3,) blended color
    shape: str                 # one of SHAPE_NAMES
    cx: float                  # center, fraction of width
    cy: float                  # center, fraction of height
    size: float                # half-extent / radius, fraction of min dim


def params_from_z(z: np.ndarray) -> SceneParams:
    """Deterministic latent -> scene parameters map (latent dim 64).

    Color is a softmax blend over the palette so it varies smoothly with z;
    shape class is the argmax of three logits.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size != LATENT_DIM:
        raise ValueError(f"expected latent dim {LATENT_DIM}, got {z.size}")
    logits = z[0:10] / 0.3
    wts = np.exp(logits - logits.max())
    wts = wts / wts.sum()
    rgb = wts @ COLOR_RGB01
    shape = SHAPE_NAMES[int(np.argmax(z[10:13]))]
    cx = 0.5 + 0.30 * np.tanh(z[13])
    cy = 0.5 + 0.30 * np.tanh(z[14])
    size = 0.14 + 0.10 / (1.0 + np.exp(-z[15]))
    return SceneParams(rgb01=rgb, shape=shape, cx=float(cx), cy=float(cy), size=float(size))


def _shape_sdf(shape: str, dx: np.ndarray, dy: np.ndarray, size: float) -> np.ndarray:
    """Signed distance (pixels) from the shape boundary; negative inside."""
    if shape == "square":
        return np.maximum(np.abs(dx), np.abs(dy)) - size
    if shape == "circle":
        return np.sqrt(dx * dx + dy * dy) - size
    if shape == "triangle":
        # equilateral triangle pointing up (negative y is up in image coords),
        # circumradius = size; intersection of three half-planes
        d = None
        for ang in (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3):
            # outward normal of each edge; edge at distance size/2 from center
            nx, ny = np.cos(ang), -np.sin(ang)
            di = nx * dx + ny * dy - size * 0.5
            d = di if d is None else np.maximum(d, di)
        return d
    raise ValueError(f"unknown shape {shape!r}")


def coverage(params: SceneParams, height: int, width: int,
             edge_px: float = 1.5) -> np.ndarray:
    """Anti-aliased coverage field in [0, 1] for the shape."""
    ys, xs = np.mgrid[0:height, 0:width]
    dx = xs + 0.5 - params.cx * width
    dy = ys + 0.5 - params.cy * height
    size_px = params.size * min(height, width)
    sdf = _shape_sdf(params.shape, dx, dy, size_px)
    return np.clip(0.5 - sdf / edge_px, 0.0, 1.0)


def render(params: SceneParams, height: int = 64, width: int = 64,
           dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Render the scene to an image tensor in [-1, 1]; background is exactly 0."""
    cov = coverage(params, height, width)
    col = params.rgb01 * 2.0 - 1.0
    img = cov[None, :, :] * col[:, None, None]
    return torch.from_numpy(np.ascontiguousarray(img)).to(dtype)


def support_mask(params: SceneParams, height: int, width: int,
                 dilate_px: float = 0.0, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Binary mask of the shape's support, optionally dilated by a pixel margin."""
    ys, xs = np.mgrid[0:height, 0:width]
    dx = xs + 0.5 - params.cx * width
    dy = ys + 0.5 - params.cy * height
    size_px = params.size * min(height, width)
    sdf = _shape_sdf(params.shape, dx, dy, size_px)
    return torch.from_numpy((sdf <= dilate_px).astype(np.float64)).to(dtype)


def ideal_shape_mass(shape: str, res: int = 192) -> np.ndarray:
    """High-resolution filled silhouette of a centered shape, used to derive
    the scorer's reference shape-moment statistics."""
    p = SceneParams(rgb01=np.array([1.0, 1.0, 1.0]), shape=shape,
                    cx=0.5, cy=0.5, size=0.35)
    return coverage(p, res, res, edge_px=1.0)


def sample_scene_z(rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(LATENT_DIM)
