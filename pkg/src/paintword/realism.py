"""Realism proxies: scores that are logged alongside the optimization but
never optimized. The primary proxy is a small convolutional discriminator
trained against the colored-shapes corpus (scripts/train_toy_generator.py);
a moment-statistics fallback needs no training."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from .container import load_container, save_container
from .errors import DimensionMismatch

ASSETS_DIR = Path(__file__).parent / "assets"


class ToyDiscriminator(nn.Module):
    """3x64x64 image -> realism logit; higher means more corpus-like."""

    kind = "toy_discriminator"

    def __init__(self, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.conv1 = nn.Conv2d(3, 16, 4, stride=2, padding=1)    # 32
        self.conv2 = nn.Conv2d(16, 32, 4, stride=2, padding=1)   # 16
        self.conv3 = nn.Conv2d(32, 32, 4, stride=2, padding=1)   # 8
        self.fc = nn.Linear(32 * 8 * 8, 1)
        for p in self.parameters():
            nn.init.normal_(p, std=0.05, generator=gen)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim == 3:
            x = x.unsqueeze(0)
        h = nn.functional.leaky_relu(self.conv1(x), 0.2)
        h = nn.functional.leaky_relu(self.conv2(h), 0.2)
        h = nn.functional.leaky_relu(self.conv3(h), 0.2)
        return self.fc(h.flatten(1)).squeeze(-1)

    def save(self, path: str | Path) -> None:
        arrays = {k: v.detach().to(torch.float32).numpy()
                  for k, v in self.state_dict().items()}
        save_container(path, self.kind, arrays, meta={})

    @classmethod
    def load(cls, path: str | Path) -> "ToyDiscriminator":
        kind, arrays, _ = load_container(path)
        if kind != cls.kind:
            raise DimensionMismatch(f"container kind {kind!r} != {cls.kind!r}")
        d = cls()
        d.load_state_dict({k: torch.as_tensor(v) for k, v in arrays.items()})
        d.eval()
        for p in d.parameters():
            p.requires_grad_(False)
        return d


class DiscriminatorRealism:
    """Probability-of-real under the trained toy discriminator."""

    name = "toy-discriminator"

    def __init__(self, disc: ToyDiscriminator):
        self.disc = disc

    def __call__(self, image: torch.Tensor) -> float:
        with torch.no_grad():
            return float(torch.sigmoid(self.disc(image.unsqueeze(0))))


class MomentRealism:
    """Training-free fallback: penalizes pixel statistics far from the
    corpus regime (values hugging [-1, 1], low background energy)."""

    name = "moment-stats"

    def __call__(self, image: torch.Tensor) -> float:
        x = image.detach().to(torch.float64)
        overshoot = (x.abs() > 0.98).double().mean()
        roughness = (x[:, :, 1:] - x[:, :, :-1]).abs().mean() \
            + (x[:, 1:, :] - x[:, :-1, :]).abs().mean()
        return float(np.exp(-2.0 * float(overshoot) - 2.0 * float(roughness)))


def trained_discriminator_path() -> Path:
    return ASSETS_DIR / "toy_discriminator.bin"


def default_realism_proxy():
    """Trained discriminator when shipped, moment fallback otherwise."""
    path = trained_discriminator_path()
    if path.exists():
        return DiscriminatorRealism(ToyDiscriminator.load(path))
    return MomentRealism()
