"""Aggregation rules, client weights and inference-model assembly."""

import numpy as np
import pytest

from lib.exceptions import ConfigurationError, FederationStateError, ProtocolError
from lib.models import ArchConfig
from lib.network import ModelParams, ParamLeaf
from lib.training.aggregation import aggregate, broadcast, build_inference_model, client_weights
from lib.training.federation import FederationState

LEAF_LAYOUT = {
    "shape_encoder.stages.0.0.weight": ("shape", "learnable", (3, 2)),
    "shape_encoder.stages.0.1.running_mean": ("shape", "norm_statistic", (3,)),
    "appearance_encoder.stages.0.0.weight": ("appearance", "learnable", (3, 2)),
    "appearance_encoder.stages.0.1.running_var": ("appearance", "norm_statistic", (3,)),
    "decoder.0.shape.0.bias": ("decoder_shape", "learnable", (4,)),
    "decoder.0.appearance.0.bias": ("decoder_appearance", "learnable", (4,)),
    "decoder.0.appearance.1.running_mean": ("decoder_appearance", "norm_statistic", (4,)),
    "head_shape.weight": ("decoder_shape", "learnable", (1, 2)),
}

STRATEGIES = ("fedavg", "feddis", "fedvc", "silobn", "fedgn", "centralized")


def make_params(owner, rng=None, fill=None):
    leaves = {}
    for name, (path, kind, shape) in LEAF_LAYOUT.items():
        values = np.full(shape, fill, dtype=np.float32) if fill is not None else rng.normal(size=shape).astype(np.float32)
        leaves[name] = ParamLeaf(path=path, kind=kind, values=values)
    return ModelParams(arch=ArchConfig(input_size=(32, 32)), disentangled=True, leaves=leaves, owner=owner)


def values_equal(a, b, names=None):
    names = list(a.leaves) if names is None else names
    return all(np.array_equal(a.leaves[n].values, b.leaves[n].values) for n in names)


def make_state(strategy, client_params, weights):
    global_params, retained = aggregate(strategy, client_params, weights)
    return FederationState(
        strategy=strategy,
        global_params=global_params,
        client_ids=[p.owner for p in client_params],
        weights=list(weights),
        client_params={p.owner: p for p in client_params},
        retained={p.owner: r for p, r in zip(client_params, retained)},
        rounds_completed=1,
    )


class TestClientWeights:

    def test_proportional_to_counts(self):
        assert client_weights([1, 3]) == [0.25, 0.75]

    def test_sum_to_one(self):
        assert sum(client_weights([7, 11, 13])) == pytest.approx(1.0)

    @pytest.mark.parametrize("counts", [[], [0, 0], [2, -1]])
    def test_invalid_counts(self, counts):
        with pytest.raises(ConfigurationError):
            client_weights(counts)


class TestAggregateExamples:

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_single_client(self, strategy):
        params = make_params("a", np.random.default_rng(0))
        global_params, _ = aggregate(strategy, [params], [1.0])
        assert values_equal(global_params, params)

    def test_equal_weights_mean(self):
        global_params, _ = aggregate("fedavg", [make_params("a", fill=0.0), make_params("b", fill=2.0)], [0.5, 0.5])
        for leaf in global_params.leaves.values():
            np.testing.assert_array_equal(leaf.values, 1.0)

    def test_sample_count_weights(self):
        weights = client_weights([1, 3])
        global_params, _ = aggregate("fedavg", [make_params("a", fill=0.0), make_params("b", fill=4.0)], weights)
        for leaf in global_params.leaves.values():
            np.testing.assert_allclose(leaf.values, 3.0)

    def test_dtype_preserved(self):
        global_params, _ = aggregate("fedavg", [make_params("a", fill=0.0), make_params("b", fill=2.0)], [0.5, 0.5])
        assert all(leaf.values.dtype == np.float32 for leaf in global_params.leaves.values())

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ProtocolError):
            aggregate("fedavg", [make_params("a", fill=0.0), make_params("b", fill=1.0)], [0.5, 0.6])

    def test_structural_mismatch(self):
        a, b = make_params("a", fill=0.0), make_params("b", fill=1.0)
        del b.leaves["head_shape.weight"]
        with pytest.raises(ProtocolError):
            aggregate("fedavg", [a, b], [0.5, 0.5])

    def test_duplicate_owners(self):
        with pytest.raises(ProtocolError):
            aggregate("fedavg", [make_params("a", fill=0.0), make_params("a", fill=1.0)], [0.5, 0.5])

    def test_feddis_retains_appearance(self):
        a, b = make_params("a", fill=0.0), make_params("b", fill=2.0)
        _, retained = aggregate("feddis", [a, b], [0.5, 0.5])
        assert set(retained[0]) == set(a.appearance_names())
        np.testing.assert_array_equal(retained[1]["decoder.0.appearance.0.bias"], 2.0)

    def test_silobn_retains_norm_statistics(self):
        a, b = make_params("a", fill=0.0), make_params("b", fill=2.0)
        _, retained = aggregate("silobn", [a, b], [0.5, 0.5])
        assert set(retained[0]) == set(a.names(kind="norm_statistic"))

    @pytest.mark.parametrize("strategy", ["fedavg", "fedvc", "fedgn"])
    def test_share_everything(self, strategy):
        _, retained = aggregate(strategy, [make_params("a", fill=0.0), make_params("b", fill=2.0)], [0.5, 0.5])
        assert retained == [{}, {}]

    def test_broadcast_restores_retained(self):
        a, b = make_params("a", fill=0.0), make_params("b", fill=2.0)
        global_params, retained = aggregate("feddis", [a, b], [0.5, 0.5])
        start = broadcast(global_params, retained[1], "b")
        assert start.owner == "b"
        assert values_equal(start, b, b.appearance_names())
        assert values_equal(start, global_params, b.shape_names())


class TestAggregateProperties:
    """Randomized trees and weights, 200 trials."""

    TRIALS = 200

    def _trial(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        clients = [make_params(f"c{i}", rng) for i in range(n)]
        weights = list(rng.dirichlet(np.ones(n)))
        return rng, clients, weights

    def test_permutation_invariance(self):
        for seed in range(self.TRIALS):
            rng, clients, weights = self._trial(seed)
            strategy = STRATEGIES[seed % len(STRATEGIES)]
            order = rng.permutation(len(clients))
            first, retained_a = aggregate(strategy, clients, weights)
            second, retained_b = aggregate(strategy, [clients[i] for i in order], [weights[i] for i in order])
            assert first.checksum() == second.checksum()
            for j, i in enumerate(order):
                assert retained_b[j].keys() == retained_a[i].keys()
                for name in retained_a[i]:
                    assert np.array_equal(retained_b[j][name], retained_a[i][name])

    def test_identity_on_identical_clients(self):
        for seed in range(self.TRIALS):
            rng, clients, weights = self._trial(seed)
            template = clients[0]
            copies = [template.copy(owner=f"c{i}") for i in range(len(clients))]
            global_params, _ = aggregate(STRATEGIES[seed % len(STRATEGIES)], copies, weights)
            assert values_equal(global_params, template)

    def test_feddis_appearance_retention(self):
        for seed in range(self.TRIALS):
            _, clients, weights = self._trial(seed)
            _, retained = aggregate("feddis", clients, weights)
            for params, kept in zip(clients, retained):
                assert set(kept) == set(params.appearance_names())
                for name in kept:
                    assert np.array_equal(kept[name], params.leaves[name].values)

    def test_silobn_statistic_retention(self):
        for seed in range(self.TRIALS):
            _, clients, weights = self._trial(seed)
            _, retained = aggregate("silobn", clients, weights)
            for params, kept in zip(clients, retained):
                assert set(kept) == set(params.names(kind="norm_statistic"))
                for name in kept:
                    assert np.array_equal(kept[name], params.leaves[name].values)


class TestInferenceModel:

    def test_before_any_round(self):
        params = make_params("a", fill=0.0)
        state = FederationState(strategy="feddis", global_params=params, client_ids=["a"], weights=[1.0])
        with pytest.raises(FederationStateError):
            build_inference_model(state)

    def test_single_client_is_that_client(self):
        params = make_params("a", np.random.default_rng(1))
        inference = build_inference_model(make_state("feddis", [params], [1.0]))
        assert values_equal(inference, params)

    def test_appearance_mean_and_global_shape(self):
        a, b = make_params("a", fill=0.0), make_params("b", fill=2.0)
        state = make_state("feddis", [a, b], [0.5, 0.5])
        inference = build_inference_model(state)
        for name in a.appearance_names():
            np.testing.assert_array_equal(inference.leaves[name].values, 1.0)
        assert values_equal(inference, state.global_params, a.shape_names())

    @pytest.mark.parametrize("strategy", ["fedavg", "silobn", "fedgn", "fedvc"])
    def test_pass_through(self, strategy):
        rng = np.random.default_rng(2)
        state = make_state(strategy, [make_params("a", rng), make_params("b", rng)], [0.3, 0.7])
        assert build_inference_model(state).checksum() == state.global_params.checksum()
