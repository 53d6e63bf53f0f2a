"""Disentangled autoencoder, tagged parameter tree and gamma augmentation."""

from dataclasses import replace

import numpy as np
import pytest
import torch

from lib.exceptions import ConfigurationError, ShapeError
from lib.models import ArchConfig, ScanSlice
from lib.network import (
    SHAPE_PATHS,
    build_module,
    decode,
    encode,
    forward_train,
    gamma_augment,
    gamma_shift,
    init_model,
    reconstruct,
)


def _perturbed(params, names, delta=0.5):
    return params.replace({n: params.leaves[n].values + delta for n in names})


class TestArchitecture:

    def test_default_bottleneck_at_128(self):
        arch = ArchConfig(input_size=(128, 128))
        z_s, z_a = encode(init_model(arch, 0), np.zeros((128, 128)))
        assert tuple(z_s.shape) == (1, 64, 8, 8)
        assert tuple(z_a.shape) == (1, 64, 8, 8)

    def test_bottleneck_is_sixteenth_of_input(self):
        arch = ArchConfig(base_filters=8, max_filters=32, bottleneck_channels=16, input_size=(64, 64))
        z_s, _ = encode(init_model(arch, 0), np.zeros((64, 64)))
        assert tuple(z_s.shape[2:]) == (4, 4)

    def test_odd_bottleneck_rejected(self, tiny_arch):
        with pytest.raises(ConfigurationError):
            init_model(replace(tiny_arch, bottleneck_channels=7), 0)

    def test_odd_bottleneck_allowed_for_baseline(self, tiny_arch):
        params = init_model(replace(tiny_arch, bottleneck_channels=7), 0, disentangled=False)
        assert not params.disentangled

    def test_same_seed_same_parameters(self, tiny_arch):
        assert init_model(tiny_arch, 3).checksum() == init_model(tiny_arch, 3).checksum()
        assert init_model(tiny_arch, 3).checksum() != init_model(tiny_arch, 4).checksum()

    def test_parameter_parity_with_baseline(self):
        arch = ArchConfig()
        disentangled = init_model(arch, 0, disentangled=True).count_learnable()
        baseline = init_model(arch, 0, disentangled=False).count_learnable()
        assert abs(disentangled - baseline) <= 0.1 * baseline

    def test_leaves_are_tagged(self, tiny_arch):
        params = init_model(tiny_arch, 0)
        paths = {leaf.path for leaf in params.leaves.values()}
        assert paths == {"shape", "appearance", "decoder_shape", "decoder_appearance"}
        assert params.names(kind="norm_statistic")
        theta_s, theta_a = params.partition()
        assert set(theta_s) | set(theta_a) == set(params.leaves)
        assert not set(theta_s) & set(theta_a)

    def test_group_norm_has_no_statistics(self, tiny_arch):
        params = init_model(replace(tiny_arch, norm_kind="group"), 0, disentangled=False)
        assert not params.names(kind="norm_statistic")


class TestEncodeDecode:

    def test_round_trip_shape_and_range(self, tiny_arch):
        params = init_model(tiny_arch, 1)
        x = np.random.default_rng(0).uniform(size=(32, 32))
        out = reconstruct(params, x)
        assert out.shape == x.shape
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert np.abs(out - x).mean() > 0

    def test_decode_arbitrary_latents_bounded(self, tiny_arch):
        params = init_model(tiny_arch, 1)
        z = torch.randn(3, 4, 2, 2) * 50
        out = decode(params, z, torch.randn(3, 4, 2, 2) * 50)
        assert out.shape == (3, 1, 32, 32)
        assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0

    def test_wrong_input_size(self, tiny_arch):
        with pytest.raises(ShapeError):
            encode(init_model(tiny_arch, 1), np.zeros((64, 64)))

    def test_mismatched_latents(self, tiny_arch):
        params = init_model(tiny_arch, 1)
        with pytest.raises(ShapeError):
            decode(params, torch.zeros(1, 4, 2, 2), torch.zeros(1, 3, 2, 2))

    def test_appearance_leaves_do_not_touch_shape_embedding(self, tiny_arch):
        params = init_model(tiny_arch, 2)
        x = np.random.default_rng(1).uniform(size=(32, 32))
        changed = _perturbed(params, params.names(["appearance"]))
        z_s, z_a = encode(params, x)
        z_s2, z_a2 = encode(changed, x)
        assert torch.equal(z_s, z_s2)
        assert not torch.equal(z_a, z_a2)

    def test_evaluation_mode_is_deterministic(self, tiny_arch):
        params = init_model(tiny_arch, 2)
        x = np.random.default_rng(2).uniform(size=(32, 32))
        np.testing.assert_array_equal(reconstruct(params, x), reconstruct(params, x))

    def test_build_module_round_trips_leaves(self, tiny_arch):
        params = init_model(tiny_arch, 2)
        module = build_module(params)
        state = module.state_dict()
        for name, leaf in params.leaves.items():
            np.testing.assert_array_equal(state[name].numpy(), leaf.values)


class TestGammaAugment:

    @pytest.fixture
    def scan(self):
        pixels = np.array([[0.0, 0.25], [1.0, 0.5]])
        return ScanSlice("g", pixels, np.array([[True, True], [True, False]]))

    def test_identity(self, scan):
        np.testing.assert_array_equal(gamma_augment(scan, 1.0).pixels, scan.pixels)

    def test_square(self, scan):
        out = gamma_augment(scan, 2.0).pixels
        assert out[0, 1] == pytest.approx(0.0625)
        assert out[1, 1] == 0.5  # outside the mask

    @pytest.mark.parametrize("gamma", [0.3, 1.7, 4.0])
    def test_fixed_points(self, scan, gamma):
        out = gamma_augment(scan, gamma).pixels
        assert out[0, 0] == 0.0 and out[1, 0] == 1.0

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_non_positive_gamma(self, scan, gamma):
        with pytest.raises(ConfigurationError):
            gamma_augment(scan, gamma)
        with pytest.raises(ConfigurationError):
            gamma_shift(torch.zeros(1, 1, 2, 2), gamma)


class TestForwardTrain:

    def test_unit_gamma_shape_embeddings_match(self, tiny_arch):
        params = init_model(tiny_arch, 4)
        x = np.random.default_rng(3).uniform(size=(32, 32))
        _, triple = forward_train(params, x, 1.0)
        assert torch.equal(triple.z_s, triple.z_gs)

    def test_triple_shapes(self, tiny_arch):
        params = init_model(tiny_arch, 4)
        x_rec, triple = forward_train(params, np.zeros((32, 32)), 1.5)
        assert tuple(x_rec.shape) == (1, 1, 32, 32)
        for z in (triple.z_s, triple.z_a, triple.z_gs):
            assert tuple(z.shape) == (1, 4, 2, 2)

    def test_appearance_leaves_do_not_touch_shifted_shape(self, tiny_arch):
        params = init_model(tiny_arch, 4)
        x = np.random.default_rng(4).uniform(size=(32, 32))
        changed = _perturbed(params, params.appearance_names())
        _, a = forward_train(params, x, 0.6)
        _, b = forward_train(changed, x, 0.6)
        assert torch.equal(a.z_gs, b.z_gs)

    def test_shape_names_match_shape_paths(self, tiny_arch):
        params = init_model(tiny_arch, 4)
        assert all(params.leaves[n].path in SHAPE_PATHS for n in params.shape_names())
