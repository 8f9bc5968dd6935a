"""Loss assembly over the split generator: masked semantic loss, outside-mask
image consistency loss, and their weighted total. Also the vector-valued
objectives handed to the optimizers (region edit over w, full-image over z).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidConfig
from .generators import GeneratorModel, SplitState, generate_split
from .imageops import invert_mask, masked_project
from .scorers import ImageDistance, Prompt, SemanticScorer, masked_score, score


@dataclass
class LossConfig:
    scorer: SemanticScorer
    distance: ImageDistance
    prompt: Prompt
    mask: torch.Tensor
    lambda_img: float = 1.0

    def __post_init__(self):
        if self.lambda_img < 0:
            raise InvalidConfig("lambda_img must be nonnegative")
        self.prompt.require_nonempty()


@dataclass(frozen=True)
class LossBreakdown:
    semantic: float
    image: float
    lambda_img: float

    @property
    def total(self) -> float:
        return self.semantic + self.lambda_img * self.image

    def to_dict(self) -> dict:
        return {"semantic": self.semantic, "image": self.image,
                "total": self.total, "lambda_img": self.lambda_img}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def semantic_loss(cfg: LossConfig, g: GeneratorModel, s: SplitState,
                  w: torch.Tensor) -> torch.Tensor:
    """-C(G_split(w) . m, t)."""
    return -masked_score(cfg.scorer, generate_split(g, s, w), cfg.mask, cfg.prompt)


def image_loss(cfg: LossConfig, g: GeneratorModel, s: SplitState, w: torch.Tensor,
               x_original: torch.Tensor) -> torch.Tensor:
    """d(x0 . (1-m), G_split(w) . (1-m)): limits change outside the mask."""
    inv = invert_mask(cfg.mask).to(x_original.dtype)
    x_new = generate_split(g, s, w)
    return cfg.distance(masked_project(x_original, inv), masked_project(x_new, inv))


def total_loss(cfg: LossConfig, g: GeneratorModel, s: SplitState, w: torch.Tensor,
               x_original: torch.Tensor) -> LossBreakdown:
    x_new = generate_split(g, s, w)
    sem = -masked_score(cfg.scorer, x_new, cfg.mask, cfg.prompt)
    inv = invert_mask(cfg.mask).to(x_original.dtype)
    img = cfg.distance(masked_project(x_original, inv), masked_project(x_new, inv))
    return LossBreakdown(semantic=float(sem), image=float(img),
                         lambda_img=cfg.lambda_img)


class Objective:
    """Vector objective consumed by the schedule runner."""

    dim: int
    differentiable: bool = False

    def evaluate(self, v: np.ndarray) -> LossBreakdown:
        raise NotImplementedError

    def evaluate_batch(self, vs: list[np.ndarray]) -> list[LossBreakdown]:
        return [self.evaluate(v) for v in vs]

    def gradient(self, v: np.ndarray) -> tuple[LossBreakdown, np.ndarray]:
        raise InvalidConfig("objective does not expose gradients")

    def render(self, v: np.ndarray) -> torch.Tensor:
        raise NotImplementedError

    def initial_vector(self) -> np.ndarray:
        raise NotImplementedError


class EditObjective(Objective):
    """Region edit: total loss over the flattened free interior latent w."""

    def __init__(self, cfg: LossConfig, g: GeneratorModel, split: SplitState,
                 x_original: torch.Tensor):
        self.cfg = cfg
        self.g = g
        self.split = split
        self.x_original = x_original.detach()
        self.dim = int(split.original_inside.numel())
        self.differentiable = bool(getattr(cfg.scorer, "differentiable", False)
                                   and getattr(g, "differentiable", False))

    def initial_vector(self) -> np.ndarray:
        return self.g.latent_to_vec(self.split.original_inside)

    def _loss_terms(self, w: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x_new = generate_split(self.g, self.split, w)
        sem = -masked_score(self.cfg.scorer, x_new, self.cfg.mask, self.cfg.prompt)
        inv = invert_mask(self.cfg.mask).to(x_new.dtype)
        img = self.cfg.distance(masked_project(self.x_original.to(x_new.dtype), inv),
                                masked_project(x_new, inv))
        return sem, img

    def evaluate(self, v: np.ndarray) -> LossBreakdown:
        with torch.no_grad():
            sem, img = self._loss_terms(self.g.vec_to_latent(v))
        return LossBreakdown(float(sem), float(img), self.cfg.lambda_img)

    def gradient(self, v: np.ndarray) -> tuple[LossBreakdown, np.ndarray]:
        if not self.differentiable:
            raise InvalidConfig("scorer or generator is not differentiable")
        w = self.g.vec_to_latent(v).clone().requires_grad_(True)
        sem, img = self._loss_terms(w)
        tot = sem + self.cfg.lambda_img * img
        (grad,) = torch.autograd.grad(tot, w)
        bd = LossBreakdown(float(sem.detach()), float(img.detach()),
                           self.cfg.lambda_img)
        return bd, grad.detach().to(torch.float64).reshape(-1).numpy()

    def render(self, v: np.ndarray) -> torch.Tensor:
        with torch.no_grad():
            return generate_split(self.g, self.split, self.g.vec_to_latent(v))


class FullImageObjective(Objective):
    """Full-image text-guided sampling: minimize -C(G(z), t) over z."""

    def __init__(self, g: GeneratorModel, scorer: SemanticScorer, prompt: Prompt):
        self.g = g
        self.scorer = scorer
        self.prompt = prompt.require_nonempty()
        self.dim = g.latent_dim
        self.differentiable = bool(getattr(scorer, "differentiable", False)
                                   and getattr(g, "differentiable", False))

    def initial_vector(self) -> np.ndarray:
        return np.zeros(self.dim)

    def _z(self, v: np.ndarray) -> torch.Tensor:
        dtype = getattr(self.g, "dtype", torch.float32)
        return torch.as_tensor(np.asarray(v, dtype=np.float64)).to(dtype)

    def evaluate(self, v: np.ndarray) -> LossBreakdown:
        with torch.no_grad():
            s = score(self.scorer, self.g.generate(self._z(v)), self.prompt)
        return LossBreakdown(semantic=-float(s), image=0.0, lambda_img=0.0)

    def gradient(self, v: np.ndarray) -> tuple[LossBreakdown, np.ndarray]:
        if not self.differentiable:
            raise InvalidConfig("scorer or generator is not differentiable")
        z = self._z(v).clone().requires_grad_(True)
        s = score(self.scorer, self.g.generate(z), self.prompt)
        (grad,) = torch.autograd.grad(-s, z)
        bd = LossBreakdown(semantic=-float(s.detach()), image=0.0, lambda_img=0.0)
        return bd, grad.detach().to(torch.float64).reshape(-1).numpy()

    def render(self, v: np.ndarray) -> torch.Tensor:
        with torch.no_grad():
            return self.g.generate(self._z(v))
