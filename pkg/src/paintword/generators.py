"""Generator abstraction G = h(f(z)) and the two region-split constructions.

A generator exposes an interior latent w = f(z) that carries spatial meaning:

* feature-map kind: w is a C x h x w feature tensor; the split freezes the
  feature cells outside a (downsampled, soft) mask and lets the inside vary.
* style kind: w is a style vector that modulates every conv block; the split
  keeps one style outside the mask and another inside, blended per layer
  resolution by the soft mask. Because the per-channel gains/biases are
  affine in the style, blending modulations equals blending style fields, so
  the split state is stored as a spatial style field per resolution.

Two self-contained toy generators are provided so every invariant is testable
with random weights; a training script (scripts/train_toy_generator.py) fits
the feature-map toy to the colored-shapes corpus for end-to-end demos.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .container import load_container, save_container
from .errors import DimensionMismatch
from .imageops import downsample_mask, require_nonempty, validate_mask

FEATURE_KIND = "feature-map"
STYLE_KIND = "style"


class StyleField:
    """Per-resolution spatial style tensors (style_dim, res, res)."""

    def __init__(self, fields: dict[int, torch.Tensor]):
        self.fields = fields

    @classmethod
    def uniform(cls, style: torch.Tensor, resolutions: list[int]) -> "StyleField":
        return cls({r: style[:, None, None].expand(style.shape[0], r, r).clone()
                    for r in resolutions})

    def clone(self) -> "StyleField":
        return StyleField({r: f.clone() for r, f in self.fields.items()})


@dataclass
class SplitState:
    """Frozen-outside decomposition of an interior latent against a mask.

    The effective canvas for a free inside latent w is base + (w - base) * mask,
    which equals frozen_outside + w * mask with frozen_outside = base - base * mask
    but is exact (bitwise) at w = base.
    """
    kind: str
    base: object                      # feature tensor or StyleField
    masks: dict[int, torch.Tensor]    # resolution -> soft feature mask
    original_inside: torch.Tensor     # feature tensor (C,h,w) or style vector
    image_mask: torch.Tensor          # the image-resolution binary mask

    @property
    def frozen_outside(self):
        """base - base * mask, the part of the canvas an edit can never touch."""
        if self.kind == FEATURE_KIND:
            mu = next(iter(self.masks.values()))
            return self.base - self.base * mu
        return StyleField({r: f - f * self.masks[r]
                           for r, f in self.base.fields.items()})


class GeneratorModel:
    """Interface shared by toy and adapter-backed generators."""

    name: str = "generator"
    latent_dim: int
    image_shape: tuple[int, int, int]
    split_kind: str
    differentiable: bool = True

    @property
    def dtype(self) -> torch.dtype:
        return torch.float32

    def generate(self, z: torch.Tensor) -> torch.Tensor:
        return self.compose(self.extract_latent(z))

    def extract_latent(self, z: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def compose(self, latent) -> torch.Tensor:
        raise NotImplementedError

    # flattened-vector view of a free interior latent
    def latent_to_vec(self, w: torch.Tensor) -> np.ndarray:
        return w.detach().to(torch.float64).reshape(-1).numpy().copy()

    def vec_to_latent(self, v: np.ndarray) -> torch.Tensor:
        raise NotImplementedError

    def interior_numel(self) -> int:
        raise NotImplementedError

    def base_canvas(self, z: torch.Tensor):
        """Initial composable canvas for a session (see engine)."""
        return self.extract_latent(z)

    def _check_z(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 1 or z.shape[0] != self.latent_dim:
            raise DimensionMismatch(
                f"latent dim {tuple(z.shape)} != ({self.latent_dim},)")
        return z


def _check_image_mask(g: GeneratorModel, m: torch.Tensor) -> torch.Tensor:
    validate_mask(m)
    if tuple(m.shape) != tuple(g.image_shape[1:]):
        raise DimensionMismatch(
            f"mask dims {tuple(m.shape)} != image dims {tuple(g.image_shape[1:])}")
    require_nonempty(m)
    return m


def make_split_from_canvas(g: GeneratorModel, canvas, m: torch.Tensor) -> SplitState:
    """Split an arbitrary composable canvas (interior latent or style field)."""
    _check_image_mask(g, m)
    if g.split_kind == FEATURE_KIND:
        c, h, w = canvas.shape
        mu = downsample_mask(m, h, w).to(canvas.dtype)
        return SplitState(FEATURE_KIND, canvas.detach().clone(), {h: mu},
                          canvas.detach().clone(), m.clone())
    if g.split_kind == STYLE_KIND:
        field = canvas if isinstance(canvas, StyleField) else StyleField.uniform(
            canvas, g.modulated_resolutions)
        dtype = next(iter(field.fields.values())).dtype
        masks = {r: downsample_mask(m, r, r).to(dtype) for r in field.fields}
        # starting style for the free inside region: mask-weighted mean of the
        # base field at the finest resolution (equals the base style exactly
        # when the field is uniform)
        rmax = max(field.fields)
        mu = masks[rmax]
        f64 = field.fields[rmax].to(torch.float64)
        mu64 = mu.to(torch.float64)
        denom = mu64.sum()
        if float(denom) == 0.0:
            w0 = f64.mean(dim=(1, 2)).to(dtype)
        else:
            w0 = ((f64 * mu64).sum(dim=(1, 2)) / denom).to(dtype)
        return SplitState(STYLE_KIND, field.clone(), masks, w0, m.clone())
    raise DimensionMismatch(f"unknown split kind {g.split_kind!r}")


def make_split(g: GeneratorModel, z: torch.Tensor, m: torch.Tensor) -> SplitState:
    """Split the interior latent of G at z against mask m (w0 = w - w.m)."""
    return make_split_from_canvas(g, g.base_canvas(z), m)


def split_canvas(s: SplitState, w: torch.Tensor):
    """Effective canvas frozen_outside + w * mask for a free inside latent w."""
    if w.shape != s.original_inside.shape:
        raise DimensionMismatch(
            f"w shape {tuple(w.shape)} != {tuple(s.original_inside.shape)}")
    if s.kind == FEATURE_KIND:
        mu = next(iter(s.masks.values()))
        return s.base + (w - s.base) * mu
    return StyleField({
        r: f + (w[:, None, None] - f) * s.masks[r]
        for r, f in s.base.fields.items()
    })


def generate_split(g: GeneratorModel, s: SplitState, w: torch.Tensor) -> torch.Tensor:
    """Evaluate the split generator h(w0 + w . m)."""
    return g.compose(split_canvas(s, w))


def apply_edit_to_canvas(s: SplitState, w: torch.Tensor):
    """Freeze an accepted edit: the blended canvas becomes the next base."""
    canvas = split_canvas(s, w)
    if isinstance(canvas, StyleField):
        return StyleField({r: f.detach().clone() for r, f in canvas.fields.items()})
    return canvas.detach().clone()


# --- toy generators ---------------------------------------------------------


class FeatureMapToyGenerator(GeneratorModel, nn.Module):
    """Dense z -> (C x 8 x 8) feature map, then two upsample+conv blocks to
    3 x 64 x 64 with tanh. The split layer is the dense feature map."""

    kind = "feature_map_toy"
    split_kind = FEATURE_KIND

    def __init__(self, latent_dim: int = 64, channels: int = 12, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        nn.Module.__init__(self)
        self.name = "toy-feature"
        self.latent_dim = latent_dim
        self.channels = channels
        self.feature_shape = (channels, 8, 8)
        self.image_shape = (3, 64, 64)
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        self.fc = nn.Linear(latent_dim, channels * 64)
        self.conv1 = nn.Conv2d(channels, 48, 3, padding=1)
        self.conv2 = nn.Conv2d(48, 32, 3, padding=1)
        self.to_rgb = nn.Conv2d(32, 3, 3, padding=1)
        for p in self.parameters():
            nn.init.normal_(p, std=0.25, generator=gen)
        self.to(dtype)
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    @property
    def dtype(self) -> torch.dtype:
        return self.fc.weight.dtype

    def extract_latent(self, z: torch.Tensor) -> torch.Tensor:
        self._check_z(z)
        return self.fc(z.to(self.fc.weight.dtype)).reshape(self.feature_shape)

    def compose(self, latent: torch.Tensor) -> torch.Tensor:
        if tuple(latent.shape) != self.feature_shape:
            raise DimensionMismatch(
                f"feature shape {tuple(latent.shape)} != {self.feature_shape}")
        x = latent.unsqueeze(0)
        x = nn.functional.interpolate(x, scale_factor=4, mode="nearest")
        x = nn.functional.leaky_relu(self.conv1(x), 0.2)
        x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
        x = nn.functional.leaky_relu(self.conv2(x), 0.2)
        return torch.tanh(self.to_rgb(x)).squeeze(0)

    def vec_to_latent(self, v: np.ndarray) -> torch.Tensor:
        t = torch.as_tensor(np.asarray(v, dtype=np.float64),
                            dtype=self.fc.weight.dtype)
        return t.reshape(self.feature_shape)

    def interior_numel(self) -> int:
        return int(np.prod(self.feature_shape))

    def save(self, path: str | Path) -> None:
        arrays = {k: v.detach().to(torch.float32).numpy()
                  for k, v in self.state_dict().items()}
        save_container(path, self.kind, arrays, meta={
            "latent_dim": self.latent_dim, "channels": self.channels,
            "seed": self.seed})

    @classmethod
    def load(cls, path: str | Path, dtype: torch.dtype = torch.float32):
        kind, arrays, meta = load_container(path)
        if kind != cls.kind:
            raise DimensionMismatch(f"container kind {kind!r} != {cls.kind!r}")
        g = cls(latent_dim=meta["latent_dim"], channels=meta["channels"],
                seed=meta.get("seed", 0), dtype=dtype)
        g.load_state_dict({k: torch.as_tensor(v, dtype=dtype)
                           for k, v in arrays.items()})
        return g


class StyleToyGenerator(GeneratorModel, nn.Module):
    """Fixed learned constant 8x8 input; two conv blocks whose per-channel
    gains/biases are affine functions of a style vector (z mapped to style by
    a 2-layer perceptron). Modulation is spatial: a style field per layer
    resolution is contracted channelwise through the affine maps."""

    kind = "style_toy"
    split_kind = STYLE_KIND

    def __init__(self, latent_dim: int = 64, style_dim: int = 64, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        nn.Module.__init__(self)
        self.name = "toy-style"
        self.latent_dim = latent_dim
        self.style_dim = style_dim
        self.image_shape = (3, 64, 64)
        self.modulated_resolutions = [32, 64]
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        self.map1 = nn.Linear(latent_dim, style_dim)
        self.map2 = nn.Linear(style_dim, style_dim)
        self.const = nn.Parameter(torch.empty(16, 8, 8))
        self.conv1 = nn.Conv2d(16, 24, 3, padding=1)     # at res 32
        self.conv2 = nn.Conv2d(24, 16, 3, padding=1)     # at res 64
        # per-layer affine style -> (gain, bias) over out-channels
        self.gain1 = nn.Linear(style_dim, 24)
        self.bias1 = nn.Linear(style_dim, 24)
        self.gain2 = nn.Linear(style_dim, 16)
        self.bias2 = nn.Linear(style_dim, 16)
        self.to_rgb = nn.Conv2d(16, 3, 1)
        for p in self.parameters():
            nn.init.normal_(p, std=0.2, generator=gen)
        with torch.no_grad():
            self.gain1.bias.add_(1.0)
            self.gain2.bias.add_(1.0)
        self.to(dtype)
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    @property
    def dtype(self) -> torch.dtype:
        return self.map1.weight.dtype

    def extract_latent(self, z: torch.Tensor) -> torch.Tensor:
        self._check_z(z)
        s = torch.tanh(self.map1(z.to(self.map1.weight.dtype)))
        return self.map2(s)

    def base_canvas(self, z: torch.Tensor) -> StyleField:
        return StyleField.uniform(self.extract_latent(z), self.modulated_resolutions)

    @staticmethod
    def _mod_maps(affine_gain: nn.Linear, affine_bias: nn.Linear,
                  field: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        gain = torch.einsum("cs,shw->chw", affine_gain.weight, field) \
            + affine_gain.bias[:, None, None]
        bias = torch.einsum("cs,shw->chw", affine_bias.weight, field) \
            + affine_bias.bias[:, None, None]
        return gain, bias

    def compose(self, latent) -> torch.Tensor:
        field = latent if isinstance(latent, StyleField) else StyleField.uniform(
            latent, self.modulated_resolutions)
        for r in self.modulated_resolutions:
            if r not in field.fields:
                raise DimensionMismatch(f"style field missing resolution {r}")
        x = self.const.unsqueeze(0)
        x = nn.functional.interpolate(x, scale_factor=4, mode="nearest")
        g1, b1 = self._mod_maps(self.gain1, self.bias1, field.fields[32])
        x = nn.functional.leaky_relu(self.conv1(x) * g1 + b1, 0.2)
        x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
        g2, b2 = self._mod_maps(self.gain2, self.bias2, field.fields[64])
        x = nn.functional.leaky_relu(self.conv2(x) * g2 + b2, 0.2)
        return torch.tanh(self.to_rgb(x)).squeeze(0)

    def vec_to_latent(self, v: np.ndarray) -> torch.Tensor:
        t = torch.as_tensor(np.asarray(v, dtype=np.float64),
                            dtype=self.map1.weight.dtype)
        if t.numel() != self.style_dim:
            raise DimensionMismatch(f"style vector size {t.numel()} != {self.style_dim}")
        return t.reshape(self.style_dim)

    def interior_numel(self) -> int:
        return self.style_dim

    def save(self, path: str | Path) -> None:
        arrays = {k: v.detach().to(torch.float32).numpy()
                  for k, v in self.state_dict().items()}
        save_container(path, self.kind, arrays, meta={
            "latent_dim": self.latent_dim, "style_dim": self.style_dim,
            "seed": self.seed})

    @classmethod
    def load(cls, path: str | Path, dtype: torch.dtype = torch.float32):
        kind, arrays, meta = load_container(path)
        if kind != cls.kind:
            raise DimensionMismatch(f"container kind {kind!r} != {cls.kind!r}")
        g = cls(latent_dim=meta["latent_dim"], style_dim=meta["style_dim"],
                seed=meta.get("seed", 0), dtype=dtype)
        g.load_state_dict({k: torch.as_tensor(v, dtype=dtype)
                           for k, v in arrays.items()})
        return g
