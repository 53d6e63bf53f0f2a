#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Aggregation

Server-side aggregation rules for the federated strategies and assembly of
the inference model used on unseen sites.

The weighted mean is reduced in a fixed order (clients sorted by owner) as
v0 + sum_j w_j (v_j - v0), so identical inputs come back unchanged and the
result does not depend on the order clients report in.

MIT License
See LICENSE file for full license text.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError, FederationStateError, ProtocolError
from ..models import ClientDataset
from ..models.config import STRATEGIES
from ..network.params import ModelParams

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9

Retained = Dict[str, np.ndarray]


def client_weights(datasets: Sequence[Union[ClientDataset, int]]) -> List[float]:
    """w_j = N_j / sum_k N_k from datasets (train size) or raw sample counts."""
    counts = [d.n_train if isinstance(d, ClientDataset) else int(d) for d in datasets]
    if not counts or any(c < 0 for c in counts) or sum(counts) == 0:
        raise ConfigurationError(f"Sample counts must be non-negative with a positive sum, got {counts}")
    total = float(sum(counts))
    return [c / total for c in counts]


def weighted_mean(arrays: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Weighted mean accumulated in float64 around the first array."""
    base = np.asarray(arrays[0])
    acc = base.astype(np.float64)
    for array, weight in zip(arrays, weights):
        acc = acc + weight * (np.asarray(array, dtype=np.float64) - base.astype(np.float64))
    return acc.astype(base.dtype)


def averaged_names(strategy: str, params: ModelParams) -> List[str]:
    """Leaves the server averages under a strategy; the rest stay with the clients."""
    if strategy == "feddis":
        return params.shape_names()
    if strategy == "silobn":
        return params.names(kind="learnable")
    return list(params.leaves)


def _check_inputs(client_params: Sequence[ModelParams], weights: Sequence[float]) -> None:
    if not client_params:
        raise ProtocolError("Cannot aggregate an empty client list")
    if len(client_params) != len(weights):
        raise ProtocolError(f"{len(client_params)} parameter sets but {len(weights)} weights")
    if abs(sum(weights) - 1.0) > WEIGHT_TOLERANCE:
        raise ProtocolError(f"Aggregation weights sum to {sum(weights)!r}, expected 1")
    if any(w < 0 for w in weights):
        raise ProtocolError(f"Aggregation weights must be non-negative: {list(weights)}")
    owners = [p.owner for p in client_params]
    if len(set(owners)) != len(owners):
        raise ProtocolError(f"Duplicate client owners in aggregation: {owners}")
    reference = client_params[0].structure()
    for params in client_params[1:]:
        if params.structure() != reference or params.disentangled != client_params[0].disentangled:
            raise ProtocolError(f"Parameter tree of {params.owner} differs from {client_params[0].owner}")


def aggregate(
    strategy: str,
    client_params: Sequence[ModelParams],
    weights: Sequence[float],
) -> Tuple[ModelParams, List[Retained]]:
    """Aggregate client parameters into a new global model.

    Args:
        strategy: One of the strategy names
        client_params: Locally updated parameter sets, one per client
        weights: Client weights aligned with client_params (must sum to 1)

    Returns:
        (global parameters, per-client retained leaves aligned with the input order)

    Raises:
        ProtocolError: weight-sum violation, duplicate owners or mismatched trees
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"Unknown strategy: {strategy}")
    _check_inputs(client_params, weights)

    order = sorted(range(len(client_params)), key=lambda i: client_params[i].owner)
    ordered = [client_params[i] for i in order]
    ordered_weights = [float(weights[i]) for i in order]

    template = ordered[0]
    shared = set(averaged_names(strategy, template))
    # every leaf gets the weighted mean; retained leaves are handed back per client
    means = {
        name: weighted_mean([p.leaves[name].values for p in ordered], ordered_weights)
        for name in template.leaves
    }
    global_params = template.replace(means, owner="global")

    retained = [
        {name: params.leaves[name].values.copy() for name in params.leaves if name not in shared}
        for params in client_params
    ]
    logger.debug(
        "Aggregated %d clients under %s: %d shared leaves, %d retained",
        len(client_params), strategy, len(shared), len(template.leaves) - len(shared),
    )
    return global_params, retained


def broadcast(global_params: ModelParams, retained: Optional[Retained], owner: str) -> ModelParams:
    """Start parameters for a client: the global model with its retained leaves restored."""
    if not retained:
        return global_params.copy(owner=owner)
    return global_params.replace(retained, owner=owner)


def build_inference_model(state, weights: Optional[Sequence[float]] = None) -> ModelParams:
    """Global shape model plus the averaged appearance leaves of the clients.

    Non-feddis strategies return the global model unchanged.
    """
    if state.rounds_completed < 1:
        raise FederationStateError("No federation round has completed yet")
    if state.strategy != "feddis":
        return state.global_params.copy()

    weights = list(state.weights if weights is None else weights)
    ids = list(state.client_ids)
    if len(weights) != len(ids) or abs(sum(weights) - 1.0) > WEIGHT_TOLERANCE:
        raise ProtocolError("Inference weights must align with the clients and sum to 1")
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    appearance = {}
    for name in state.global_params.appearance_names():
        arrays = [state.retained[ids[i]][name] for i in order]
        appearance[name] = weighted_mean(arrays, [weights[i] for i in order])
    return state.global_params.replace(appearance, owner="inference")
