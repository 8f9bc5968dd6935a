import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from paintword.errors import (
    DimensionMismatch, EmptyMask, EmptyPrompt, UnknownToken,
)
from paintword.imageops import masked_project
from paintword.scorers import (
    ColorShapeScorer, ImageDistance, Prompt, masked_score, score,
)
from paintword.shapes import COLOR_NAMES, COLOR_RGB01, SHAPE_NAMES, ideal_shape_mass


# --- independent numpy oracle for the analytic scorer ------------------------

def oracle_mean_color(x):
    x = np.asarray(x, dtype=np.float64)
    mass = np.abs(x).mean(axis=0)
    rgb01 = (x + 1.0) * 0.5
    total = mass.sum() + 1e-8
    return ((rgb01 * mass).sum(axis=(1, 2)) + 0.5e-8) / total


def oracle_shape_stats(mass):
    mass = np.asarray(mass, dtype=np.float64)
    h, w = mass.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    total = mass.sum() + 1e-8
    cx = (mass * xs).sum() / total
    cy = (mass * ys).sum() / total
    dx, dy = xs - cx, ys - cy
    r2 = dx * dx + dy * dy
    m2 = (mass * r2).sum() / total + 1e-8
    kurt = (mass * r2 * r2).sum() / total / m2 ** 2
    c3 = (mass * (3 * dx ** 2 * dy - dy ** 3)).sum() / total / m2 ** 1.5
    c4 = (mass * (dx ** 4 - 6 * dx ** 2 * dy ** 2 + dy ** 4)).sum() / total / m2 ** 2
    return np.array([kurt, c3, c4])


def oracle_word_score(sc, x, word):
    x = np.asarray(x, dtype=np.float64)
    if word in COLOR_NAMES:
        d2 = ((oracle_mean_color(x)[None] - sc.palette) ** 2).sum(axis=1)
        e = np.exp(-d2 / sc.tau_color)
        return e[COLOR_NAMES.index(word)] / (np.linalg.norm(e) + 1e-8)
    stats = oracle_shape_stats(np.abs(x).mean(axis=0))
    d2 = ((stats[None] - sc.shape_refs) ** 2).sum(axis=1)
    e = np.exp(-d2 / sc.tau_shape)
    return e[SHAPE_NAMES.index(word)] / (np.linalg.norm(e) + 1e-8)


def solid_image(rgb01, h=32, w=32):
    x = torch.empty(3, h, w, dtype=torch.float64)
    for c in range(3):
        x[c] = rgb01[c] * 2.0 - 1.0
    return x


class TestPrompt:
    def test_normalization(self):
        p = Prompt("  Red\t SQUARE  ")
        assert p.normalized == "red square"
        assert p.words == ["red", "square"]

    def test_empty_rejected(self):
        with pytest.raises(EmptyPrompt):
            Prompt("   ").require_nonempty()


class TestScore:
    def test_pure_red_matches_oracle_near_one(self):
        sc = ColorShapeScorer()
        x = solid_image([1.0, 0.0, 0.0])
        got = float(score(sc, x, Prompt("red")))
        expect = oracle_word_score(sc, x.numpy(), "red")
        assert abs(got - expect) <= 1e-3
        assert got > 0.97

    def test_pure_green_orthogonal_to_red(self):
        sc = ColorShapeScorer()
        x = solid_image([0.0, 1.0, 0.0])
        got = float(score(sc, x, Prompt("red")))
        expect = oracle_word_score(sc, x.numpy(), "red")
        assert abs(got - expect) <= 1e-3
        assert got < 1e-3

    @pytest.mark.parametrize("word", COLOR_NAMES)
    def test_color_words_match_oracle_on_random_images(self, word):
        sc = ColorShapeScorer()
        g = torch.Generator().manual_seed(hash(word) % 2 ** 31)
        x = (torch.rand(3, 24, 24, generator=g, dtype=torch.float64) * 2 - 1)
        got = float(score(sc, x, Prompt(word)))
        assert abs(got - oracle_word_score(sc, x.numpy(), word)) <= 1e-9

    @pytest.mark.parametrize("word", SHAPE_NAMES)
    def test_shape_words_match_oracle_on_ideal_silhouettes(self, word):
        sc = ColorShapeScorer()
        mass = torch.from_numpy(ideal_shape_mass(word, 96))
        x = torch.stack([mass, -mass * 0 + mass * 0, -mass])  # reddish silhouette
        got = float(score(sc, x, Prompt(word)))
        assert abs(got - oracle_word_score(sc, x.numpy(), word)) <= 1e-9
        # the matching shape dominates the other two
        for other in SHAPE_NAMES:
            if other != word:
                assert got > float(score(sc, x, Prompt(other)))

    def test_deterministic(self):
        sc = ColorShapeScorer()
        g = torch.Generator().manual_seed(0)
        x = torch.rand(3, 16, 16, generator=g) * 2 - 1
        assert float(score(sc, x, Prompt("blue"))) == float(score(sc, x, Prompt("blue")))

    def test_unknown_token(self):
        with pytest.raises(UnknownToken):
            score(ColorShapeScorer(), solid_image([1, 0, 0]), Prompt("rustic"))

    def test_empty_prompt(self):
        with pytest.raises(EmptyPrompt):
            score(ColorShapeScorer(), solid_image([1, 0, 0]), Prompt(""))

    def test_multi_word_prompt_is_mean_of_word_scores(self):
        sc = ColorShapeScorer()
        mass = torch.from_numpy(ideal_shape_mass("square", 64))
        x = torch.stack([mass, -mass, -mass])
        both = float(score(sc, x, Prompt("red square")))
        mean = 0.5 * (float(score(sc, x, Prompt("red")))
                      + float(score(sc, x, Prompt("square"))))
        assert abs(both - mean) <= 1e-12

    def test_gradient_matches_finite_differences(self):
        sc = ColorShapeScorer()
        g = torch.Generator().manual_seed(7)
        x0 = (torch.rand(3, 16, 16, generator=g, dtype=torch.float64) * 1.6 - 0.8)
        x = x0.clone().requires_grad_(True)
        s = score(sc, x, Prompt("red square"))
        (grad,) = torch.autograd.grad(s, x)
        rng = np.random.default_rng(1)
        flat = x0.reshape(-1)
        h = 1e-6
        for i in rng.choice(flat.numel(), size=50, replace=False):
            xp, xm = x0.clone().reshape(-1), x0.clone().reshape(-1)
            xp[i] += h
            xm[i] -= h
            fp = float(score(sc, xp.reshape(3, 16, 16), Prompt("red square")))
            fm = float(score(sc, xm.reshape(3, 16, 16), Prompt("red square")))
            fd = (fp - fm) / (2 * h)
            gi = float(grad.reshape(-1)[i])
            denom = max(abs(fd), abs(gi), 1e-8)
            assert abs(fd - gi) / denom <= 1e-4


class TestMaskedScore:
    def setup_method(self):
        self.sc = ColorShapeScorer()
        g = torch.Generator().manual_seed(11)
        self.x = torch.rand(3, 20, 20, generator=g, dtype=torch.float64) * 2 - 1
        self.m = torch.zeros(20, 20, dtype=torch.float64)
        self.m[4:14, 6:16] = 1.0

    def test_full_mask_equals_plain_score(self):
        full = torch.ones(20, 20, dtype=torch.float64)
        assert float(masked_score(self.sc, self.x, full, Prompt("red"))) == \
            float(score(self.sc, self.x, Prompt("red")))

    def test_equals_score_of_projection(self):
        a = float(masked_score(self.sc, self.x, self.m, Prompt("blue")))
        b = float(score(self.sc, masked_project(self.x, self.m), Prompt("blue")))
        assert a == b

    def test_invariant_to_outside_perturbation_exact(self):
        x2 = self.x + masked_project(
            torch.randn(3, 20, 20, generator=torch.Generator().manual_seed(3),
                        dtype=torch.float64),
            1.0 - self.m)
        a = float(masked_score(self.sc, self.x, self.m, Prompt("green")))
        b = float(masked_score(self.sc, x2, self.m, Prompt("green")))
        assert a == b

    def test_gradient_outside_mask_exactly_zero(self):
        x = self.x.clone().requires_grad_(True)
        s = masked_score(self.sc, x, self.m, Prompt("red"))
        (grad,) = torch.autograd.grad(s, x)
        outside = (self.m == 0)
        assert float(grad[:, outside].abs().max()) == 0.0
        assert float(grad[:, ~outside].abs().max()) > 0.0

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            masked_score(self.sc, self.x, torch.zeros(20, 20), Prompt("red"))

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            masked_score(self.sc, self.x, torch.ones(10, 10), Prompt("red"))


class TestScorerSerialization:
    def test_container_round_trip(self, tmp_path):
        sc = ColorShapeScorer(tau_color=0.2, tau_shape=0.3)
        path = tmp_path / "scorer.bin"
        sc.save(path)
        sc2 = ColorShapeScorer.load(path)
        assert sc2.tau_color == pytest.approx(0.2)
        g = torch.Generator().manual_seed(0)
        x = torch.rand(3, 16, 16, generator=g) * 2 - 1
        assert float(score(sc, x, Prompt("purple"))) == \
            pytest.approx(float(score(sc2, x, Prompt("purple"))), abs=1e-6)


class TestImageDistance:
    def test_zero_on_identical(self):
        d = ImageDistance()
        g = torch.Generator().manual_seed(0)
        x = torch.rand(3, 32, 32, generator=g) * 2 - 1
        assert float(d(x, x)) == 0.0

    def test_constant_offset_pixel_term(self):
        d = ImageDistance(pixel_weight=2.0, perceptual_weight=0.0)
        x = torch.zeros(3, 16, 16)
        y = x + 0.1
        assert float(d(x, y)) == pytest.approx(2.0 * 0.01, abs=1e-8)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_symmetric_and_nonnegative(self, seed):
        d = ImageDistance()
        g = torch.Generator().manual_seed(seed)
        x = torch.rand(3, 16, 16, generator=g) * 2 - 1
        y = torch.rand(3, 16, 16, generator=g) * 2 - 1
        dxy, dyx = float(d(x, y)), float(d(y, x))
        assert dxy == pytest.approx(dyx, abs=1e-9)
        assert dxy >= 0.0

    def test_seed_pinned_features(self):
        a, b = ImageDistance(seed=1234), ImageDistance(seed=1234)
        g = torch.Generator().manual_seed(1)
        x = torch.rand(3, 16, 16, generator=g) * 2 - 1
        y = torch.rand(3, 16, 16, generator=g) * 2 - 1
        assert float(a(x, y)) == float(b(x, y))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ImageDistance()(torch.zeros(3, 8, 8), torch.zeros(3, 9, 9))
