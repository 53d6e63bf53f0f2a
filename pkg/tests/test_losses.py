"""Training objective: closed-form oracles and finite-difference gradient checks."""

import math

import numpy as np
import pytest
import torch

from lib.exceptions import ConfigurationError, ShapeError
from lib.models import LOSS_MODES, LossWeights
from lib.network import LatentTriple, build_module, init_model
from lib.training.losses import (
    VARIANCE_FLOOR,
    fit_latent_distribution,
    kl_embedding,
    latent_contrastive_loss,
    latent_orthogonality_loss,
    loss_breakdown,
    reconstruction_loss,
    shape_consistency_loss,
    total_loss,
)


def embedding(values, channels=1, batch=1):
    """(B, C, 2, 2) embedding whose every channel holds the four given values."""
    base = torch.tensor(values, dtype=torch.float64).reshape(1, 1, 2, 2)
    return base.repeat(batch, channels, 1, 1)


N01 = [-1.0, 1.0, -1.0, 1.0]
N11 = [0.0, 2.0, 0.0, 2.0]
N04 = [-2.0, 2.0, -2.0, 2.0]


class TestReconstructionLoss:

    def test_identity(self):
        x = torch.rand(2, 1, 4, 4, dtype=torch.float64)
        assert float(reconstruction_loss(x, x)) == 0.0

    def test_swapped_pixels(self):
        x = torch.tensor([0.0, 1.0])
        assert float(reconstruction_loss(x, torch.tensor([1.0, 0.0]))) == pytest.approx(1.0)

    def test_matches_pixel_loop(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
        expected = 0.0
        for i in range(4):
            for j in range(4):
                expected += abs(a[i, j] - b[i, j])
        expected /= 16
        assert float(reconstruction_loss(torch.tensor(a), torch.tensor(b))) == pytest.approx(expected, rel=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reconstruction_loss(torch.zeros(4, 4), torch.zeros(4, 5))


class TestLatentDistribution:

    def test_constant_embedding(self):
        dist = fit_latent_distribution(embedding([3.0] * 4, channels=2))
        np.testing.assert_allclose(dist.mean.numpy(), 3.0)
        np.testing.assert_allclose(dist.variance.numpy(), VARIANCE_FLOOR)

    def test_two_point_population_variance(self):
        dist = fit_latent_distribution(embedding(N11))
        assert float(dist.mean) == pytest.approx(1.0)
        assert float(dist.variance) == pytest.approx(1.0)

    def test_matches_loop(self):
        z = torch.randn(2, 3, 4, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
        dist = fit_latent_distribution(z)
        for b in range(2):
            for c in range(3):
                values = [float(v) for v in z[b, c].flatten()]
                mean = sum(values) / len(values)
                variance = sum((v - mean) ** 2 for v in values) / len(values)
                assert float(dist.mean[b, c]) == pytest.approx(mean, rel=1e-9)
                assert float(dist.variance[b, c]) == pytest.approx(variance, rel=1e-9)

    def test_needs_two_positions(self):
        with pytest.raises(ShapeError):
            fit_latent_distribution(torch.zeros(1, 2, 1, 1))


class TestKLEmbedding:

    def test_identical(self):
        z = torch.randn(2, 4, 2, 2, dtype=torch.float64)
        assert float(kl_embedding(z, z)) == pytest.approx(0.0, abs=1e-12)

    def test_unit_mean_shift(self):
        assert float(kl_embedding(embedding(N01, 3), embedding(N11, 3))) == pytest.approx(0.5, rel=1e-6)

    def test_variance_ratio_four(self):
        expected = math.log(2.0) + 1.0 / 8.0 - 0.5
        assert float(kl_embedding(embedding(N01), embedding(N04))) == pytest.approx(expected, rel=1e-6)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            kl_embedding(torch.zeros(1, 2, 2, 2), torch.zeros(1, 3, 2, 2))


class TestLatentContrastiveLoss:

    def test_both_terms_vanish(self):
        triple = LatentTriple(z_s=embedding(N01), z_a=embedding([9.0, 11.0, 9.0, 11.0]), z_gs=embedding(N01))
        assert float(latent_contrastive_loss(triple, 0.5).lcl) == pytest.approx(0.0, abs=1e-12)

    def test_collapsed_embeddings(self):
        z = embedding(N01)
        triple = LatentTriple(z_s=z, z_a=z.clone(), z_gs=z.clone())
        assert float(latent_contrastive_loss(triple, 0.5).lcl) == pytest.approx(0.5)
        assert float(latent_orthogonality_loss(triple)) == pytest.approx(1.0)

    def test_beta_one_is_scl(self):
        triple = LatentTriple(z_s=embedding(N01), z_a=embedding(N04), z_gs=embedding(N11))
        assert float(latent_contrastive_loss(triple, 1.0).lcl) == pytest.approx(float(shape_consistency_loss(triple)))

    def test_scl_grows_with_separation(self):
        z_s = embedding(N01, channels=2)
        values = [
            float(shape_consistency_loss(LatentTriple(z_s=z_s, z_a=embedding(N04, 2), z_gs=z_s + shift)))
            for shift in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
        ]
        assert values[0] == pytest.approx(0.0, abs=1e-12)
        assert all(a < b for a, b in zip(values, values[1:]))
        assert values[3] == pytest.approx(0.5, rel=1e-6)


class TestTotalLoss:

    def test_no_lcl_perfect_reconstruction(self):
        x = torch.rand(1, 1, 4, 4)
        assert float(total_loss(x, x, None, LossWeights(), "no_LCL")) == 0.0

    def test_alpha_one_is_reconstruction(self):
        x, x_rec = torch.rand(1, 1, 4, 4), torch.rand(1, 1, 4, 4)
        triple = LatentTriple(z_s=embedding(N01), z_a=embedding(N01), z_gs=embedding(N04))
        for mode in LOSS_MODES:
            value = total_loss(x, x_rec, triple, LossWeights(alpha=1.0), mode)
            assert float(value) == pytest.approx(float(reconstruction_loss(x, x_rec)))

    def test_weighted_sum(self):
        x = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
        x_rec = torch.full_like(x, 0.5)
        # SCL = 0 and LOL = 1 - KL(N(0,1) || N(1,1)) = 0.5, so L_LCL = 0.25
        triple = LatentTriple(z_s=embedding(N11), z_a=embedding(N01), z_gs=embedding(N11))
        terms = loss_breakdown(x, x_rec, triple, LossWeights(alpha=0.2, beta=0.5), "full")
        assert float(terms.rec) == pytest.approx(0.5)
        assert float(terms.lol) == pytest.approx(0.5)
        assert float(terms.total) == pytest.approx(0.3)

    def test_ablations_drop_terms(self):
        x = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
        triple = LatentTriple(z_s=embedding(N11), z_a=embedding(N01), z_gs=embedding(N04))
        no_lol = loss_breakdown(x, x, triple, LossWeights(), "no_LOL")
        no_scl = loss_breakdown(x, x, triple, LossWeights(), "no_SCL")
        assert float(no_lol.lol) == 0.0 and float(no_lol.scl) > 0.0
        assert float(no_scl.scl) == 0.0 and float(no_scl.lol) > 0.0

    @pytest.mark.parametrize("beta, mode", [(1.0, "no_LOL"), (0.0, "no_SCL")])
    def test_beta_extremes_match_ablations(self, beta, mode):
        gen = torch.Generator().manual_seed(8)
        x = torch.rand(2, 1, 4, 4, dtype=torch.float64, generator=gen)
        x_rec = torch.rand(2, 1, 4, 4, dtype=torch.float64, generator=gen)
        z = [torch.randn(2, 3, 2, 2, dtype=torch.float64, generator=gen) for _ in range(3)]
        triple = LatentTriple(z_s=z[0], z_a=z[1], z_gs=z[2])
        full = total_loss(x, x_rec, triple, LossWeights(alpha=0.3, beta=beta), "full")
        ablated = total_loss(x, x_rec, triple, LossWeights(alpha=0.3, beta=0.5), mode)
        assert float(full) == pytest.approx(float(ablated), rel=1e-12)

    def test_unknown_mode(self):
        x = torch.zeros(1, 1, 4, 4)
        with pytest.raises(ConfigurationError):
            total_loss(x, x, None, LossWeights(), "no_REC")


class TestGradients:
    """Autograd against central finite differences at float64."""

    def test_loss_functions_gradcheck(self):
        gen = torch.Generator().manual_seed(3)
        z = [torch.randn(2, 3, 2, 2, dtype=torch.float64, generator=gen, requires_grad=True) for _ in range(3)]
        assert torch.autograd.gradcheck(kl_embedding, (z[0], z[1]))
        assert torch.autograd.gradcheck(
            lambda a, b, c: latent_contrastive_loss(LatentTriple(z_s=a, z_a=b, z_gs=c), 0.5).lcl,
            tuple(z),
        )

    def test_latent_loss_reaches_input_pixels(self, tiny_arch):
        module = build_module(init_model(tiny_arch, 11), dtype=torch.float64, train=False)
        gen = torch.Generator().manual_seed(6)
        x = (0.1 + 0.8 * torch.rand(2, 1, 32, 32, dtype=torch.float64, generator=gen)).requires_grad_()
        gamma = torch.tensor([0.6, 1.7], dtype=torch.float64)
        _, triple = module.forward_train(x, gamma, torch.ones_like(x))
        latent_contrastive_loss(triple, 0.5).lcl.backward()
        assert torch.isfinite(x.grad).all()
        assert float(x.grad.abs().sum()) > 0.0

    @pytest.mark.parametrize("mode", LOSS_MODES)
    def test_total_loss_parameters(self, tiny_arch, mode):
        torch.manual_seed(0)
        module = build_module(init_model(tiny_arch, 11), dtype=torch.float64, train=False)
        gen = torch.Generator().manual_seed(5)
        x = torch.rand(2, 1, 32, 32, dtype=torch.float64, generator=gen)
        mask = torch.ones_like(x)
        gamma = torch.tensor([0.6, 1.7], dtype=torch.float64)
        weights = LossWeights(alpha=0.4, beta=0.5)

        def objective():
            x_rec, triple = module.forward_train(x, gamma, mask)
            return total_loss(x, x_rec, triple, weights, mode)

        module.zero_grad()
        objective().backward()
        params = [p for p in module.parameters() if p.grad is not None]
        rng = np.random.default_rng(17)
        eps = 1e-6
        checked = 0
        for _ in range(15):
            p = params[rng.integers(len(params))]
            flat_index = int(rng.integers(p.numel()))
            analytic = float(p.grad.view(-1)[flat_index])
            with torch.no_grad():
                original = float(p.view(-1)[flat_index])
                p.view(-1)[flat_index] = original + eps
                plus = float(objective())
                p.view(-1)[flat_index] = original - eps
                minus = float(objective())
                p.view(-1)[flat_index] = original
            numeric = (plus - minus) / (2 * eps)
            assert abs(analytic - numeric) <= 1e-3 * max(abs(analytic), abs(numeric)) + 1e-8
            checked += 1
        assert checked == 15
