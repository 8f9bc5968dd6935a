"""Text-image semantic similarity and image consistency distance.

The toy scorer has exact analytic ground truth at desk scale, playing the
role CLIP plays against pretrained generators. An image is embedded as

* a soft color feature: RBF similarities between the mass-weighted mean
  color of the non-zero pixels and ten named palette colors, and
* a soft shape feature: RBF similarities between differentiable moment
  statistics of the pixel mass and reference statistics of three shapes.

A word scores as the cosine between its one-hot anchor and the feature block
of its category; a prompt scores as the mean over its words. Mass weighting
matters because masked inputs are mostly zeros (zero = mid-gray background).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .container import load_container, save_container
from .errors import DimensionMismatch, EmptyPrompt, UnknownToken
from .imageops import masked_project, require_nonempty, validate_mask
from .shapes import COLOR_NAMES, COLOR_RGB01, SHAPE_NAMES, ideal_shape_mass

_EPS = 1e-8


@dataclass(frozen=True)
class Prompt:
    """Free text, lowercased with whitespace collapsed."""
    text: str

    @property
    def normalized(self) -> str:
        return " ".join(self.text.lower().split())

    @property
    def words(self) -> list[str]:
        return self.normalized.split()

    def require_nonempty(self) -> "Prompt":
        if not self.words:
            raise EmptyPrompt("prompt is empty after normalization")
        return self


def shape_moment_stats(mass: torch.Tensor) -> torch.Tensor:
    """Scale- and translation-invariant moment statistics of a mass field.

    Returns (kurtosis, third-harmonic, fourth-harmonic):
      kurtosis  E[r^4]/E[r^2]^2 of the radial mass distribution
      c3        E[3 dx^2 dy - dy^3] / E[r^2]^1.5   (3-fold asymmetry)
      c4        E[dx^4 - 6 dx^2 dy^2 + dy^4] / E[r^2]^2  (4-fold anisotropy)
    """
    h, w = mass.shape
    ys = torch.arange(h, dtype=mass.dtype)[:, None].expand(h, w)
    xs = torch.arange(w, dtype=mass.dtype)[None, :].expand(h, w)
    total = mass.sum() + _EPS
    cx = (mass * xs).sum() / total
    cy = (mass * ys).sum() / total
    dx = xs - cx
    dy = ys - cy
    r2 = dx * dx + dy * dy
    m2 = (mass * r2).sum() / total + _EPS
    kurt = (mass * r2 * r2).sum() / total / (m2 * m2)
    c3 = (mass * (3 * dx * dx * dy - dy ** 3)).sum() / total / m2 ** 1.5
    c4 = (mass * (dx ** 4 - 6 * dx * dx * dy * dy + dy ** 4)).sum() / total / (m2 * m2)
    return torch.stack([kurt, c3, c4])


def _reference_shape_stats(res: int = 192) -> np.ndarray:
    return np.stack([
        shape_moment_stats(torch.from_numpy(ideal_shape_mass(s, res))).numpy()
        for s in SHAPE_NAMES
    ])


class SemanticScorer:
    name: str = "scorer"
    differentiable: bool = False
    score_range: tuple[float, float] = (-1.0, 1.0)

    def score(self, x: torch.Tensor, prompt: Prompt) -> torch.Tensor:
        raise NotImplementedError


class ColorShapeScorer(SemanticScorer):
    """Analytic color/shape scorer over a closed vocabulary."""

    kind = "color_shape_scorer"
    differentiable = True

    def __init__(self, tau_color: float = 0.15, tau_shape: float = 0.5,
                 palette: np.ndarray | None = None,
                 shape_refs: np.ndarray | None = None):
        self.name = "toy-colorshape"
        self.tau_color = float(tau_color)
        self.tau_shape = float(tau_shape)
        self.palette = np.array(COLOR_RGB01 if palette is None else palette,
                                dtype=np.float64)
        self.shape_refs = (_reference_shape_stats() if shape_refs is None
                           else np.array(shape_refs, dtype=np.float64))
        self.color_index = {w: i for i, w in enumerate(COLOR_NAMES)}
        self.shape_index = {w: i for i, w in enumerate(SHAPE_NAMES)}

    # --- embeddings ---------------------------------------------------------

    def image_mass(self, x: torch.Tensor) -> torch.Tensor:
        return x.abs().mean(dim=0)

    def mean_color(self, x: torch.Tensor) -> torch.Tensor:
        """Mass-weighted mean color in [0, 1]; falls back to gray when the
        image carries no mass (an all-zero image is mid-gray)."""
        mass = self.image_mass(x)
        rgb01 = (x + 1.0) * 0.5
        total = mass.sum() + _EPS
        num = (rgb01 * mass.unsqueeze(0)).sum(dim=(1, 2)) + _EPS * 0.5
        return num / total

    def color_feature(self, x: torch.Tensor) -> torch.Tensor:
        mc = self.mean_color(x)
        pal = torch.as_tensor(self.palette, dtype=x.dtype)
        d2 = ((mc[None, :] - pal) ** 2).sum(dim=1)
        return torch.exp(-d2 / self.tau_color)

    def shape_feature(self, x: torch.Tensor) -> torch.Tensor:
        stats = shape_moment_stats(self.image_mass(x))
        refs = torch.as_tensor(self.shape_refs, dtype=x.dtype)
        d2 = ((stats[None, :] - refs) ** 2).sum(dim=1)
        return torch.exp(-d2 / self.tau_shape)

    # --- scoring ------------------------------------------------------------

    def word_score(self, x: torch.Tensor, word: str) -> torch.Tensor:
        if word in self.color_index:
            e = self.color_feature(x)
            return e[self.color_index[word]] / (e.norm() + _EPS)
        if word in self.shape_index:
            e = self.shape_feature(x)
            return e[self.shape_index[word]] / (e.norm() + _EPS)
        raise UnknownToken(f"word {word!r} not in toy vocabulary")

    def score(self, x: torch.Tensor, prompt: Prompt) -> torch.Tensor:
        prompt.require_nonempty()
        vals = [self.word_score(x, w) for w in prompt.words]
        return torch.stack(vals).mean()

    # --- serialization ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        save_container(path, self.kind, {
            "palette": self.palette.astype(np.float32),
            "shape_refs": self.shape_refs.astype(np.float32),
            "taus": np.array([self.tau_color, self.tau_shape], dtype=np.float32),
        }, meta={"colors": COLOR_NAMES, "shapes": SHAPE_NAMES})

    @classmethod
    def load(cls, path: str | Path) -> "ColorShapeScorer":
        kind, arrays, _ = load_container(path)
        if kind != cls.kind:
            raise DimensionMismatch(f"container kind {kind!r} != {cls.kind!r}")
        taus = arrays["taus"]
        return cls(tau_color=float(taus[0]), tau_shape=float(taus[1]),
                   palette=arrays["palette"], shape_refs=arrays["shape_refs"])


def score(scorer: SemanticScorer, x: torch.Tensor, prompt: Prompt) -> torch.Tensor:
    prompt.require_nonempty()
    return scorer.score(x, prompt)


def masked_score(scorer: SemanticScorer, x: torch.Tensor, m: torch.Tensor,
                 prompt: Prompt) -> torch.Tensor:
    """C(x . m, t): zero-fill outside the mask, then score."""
    validate_mask(m)
    require_nonempty(m)
    prompt.require_nonempty()
    return scorer.score(masked_project(x, m), prompt)


class ImageDistance:
    """Pixel MSE plus a feature-space distance from a small frozen conv net
    with seed-pinned random weights (stand-in for a perceptual metric)."""

    def __init__(self, pixel_weight: float = 1.0, perceptual_weight: float = 1.0,
                 seed: int = 1234):
        if pixel_weight < 0 or perceptual_weight < 0:
            raise DimensionMismatch("distance weights must be nonnegative")
        self.pixel_weight = float(pixel_weight)
        self.perceptual_weight = float(perceptual_weight)
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        self.kernels = [
            torch.randn(8, 3, 3, 3, generator=gen, dtype=torch.float64) * 0.4,
            torch.randn(16, 8, 3, 3, generator=gen, dtype=torch.float64) * 0.3,
            torch.randn(16, 16, 3, 3, generator=gen, dtype=torch.float64) * 0.3,
        ]

    def features(self, x: torch.Tensor) -> torch.Tensor:
        f = x.unsqueeze(0)
        for i, k in enumerate(self.kernels):
            f = torch.nn.functional.conv2d(f, k.to(x.dtype), padding=1,
                                           stride=2 if i > 0 else 1)
            if i < len(self.kernels) - 1:
                f = torch.nn.functional.leaky_relu(f, 0.2)
        # unit-normalize over channels at each location
        return f / (f.norm(dim=1, keepdim=True) + _EPS)

    def __call__(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        if x.shape != y.shape:
            raise DimensionMismatch(
                f"image shapes differ: {tuple(x.shape)} vs {tuple(y.shape)}")
        d = x.new_zeros(())
        if self.pixel_weight:
            d = d + self.pixel_weight * ((x - y) ** 2).mean()
        if self.perceptual_weight:
            d = d + self.perceptual_weight * ((self.features(x) - self.features(y)) ** 2).mean()
        return d
