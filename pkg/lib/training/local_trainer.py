#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Local Trainer

Client-side training: minibatch ADAM on the training objective for a fixed
number of local epochs (or a capped number of resampled iterations for
virtual clients). ADAM moments start fresh every round and the learning
rate is decayed once per communication round.

MIT License
See LICENSE file for full license text.
"""

import logging
import math
from typing import Dict, List, Tuple

import numpy as np
import torch

from ..data.batching import epoch_batches, resampled_batches, stack_slices
from ..exceptions import ConfigurationError
from ..models import ClientDataset, ScanSlice
from ..models.config import FederationConfig
from ..network.autoencoder import build_module
from ..network.params import ModelParams
from ..utils.seeding import derive_seed
from .losses import loss_breakdown

logger = logging.getLogger(__name__)

LossTrace = List[Dict[str, float]]


def effective_loss_mode(config: FederationConfig, disentangled: bool) -> str:
    """Baseline (single-path) models train on reconstruction only."""
    return config.loss_mode if disentangled else "no_LCL"


def local_seed(config: FederationConfig, client: ClientDataset, round_index: int) -> int:
    """Training stream for one client and round, keyed by the client's data seed."""
    return derive_seed(config.seed, "local", client.seed, round_index)


class LocalTrainer:
    """Runs local_update for one client at a time."""

    def __init__(self, config: FederationConfig, dtype: torch.dtype = torch.float32):
        self.config = config
        self.dtype = dtype

    def _schedule(self, n: int, rng: np.random.Generator) -> List[List[np.ndarray]]:
        config = self.config
        if config.strategy != "fedvc":
            return [epoch_batches(n, config.batch_size, rng) for _ in range(config.local_epochs)]

        batches_per_epoch = math.ceil(n / config.batch_size)
        cap = config.fedvc_virtual_size or batches_per_epoch
        iterations = min(cap, config.local_epochs * batches_per_epoch)
        batches = resampled_batches(n, config.batch_size, iterations, rng)
        chunks = np.array_split(np.arange(len(batches)), config.local_epochs)
        return [[batches[i] for i in chunk] for chunk in chunks if len(chunk)]

    def local_update(
        self, client: ClientDataset, start_params: ModelParams, round_index: int
    ) -> Tuple[ModelParams, LossTrace]:
        """Train a copy of start_params on the client's training split.

        Args:
            client: Client dataset (train split is used)
            start_params: Broadcast parameters (never mutated)
            round_index: Communication round (drives the lr schedule)

        Returns:
            (updated parameters owned by the client, per-epoch mean loss terms)
        """
        if not client.train:
            raise ConfigurationError(f"Client {client.client_id} has an empty train split")
        if round_index < 0:
            raise ConfigurationError(f"round_index must be >= 0, got {round_index}")
        if self.config.local_epochs == 0:
            return start_params.copy(owner=client.client_id), []

        config = self.config
        seed = local_seed(config, client, round_index)
        rng = np.random.default_rng(seed)
        generator = torch.Generator().manual_seed(seed)

        module = build_module(start_params, dtype=self.dtype, train=True)
        module.dropout.generator = generator
        lr = config.learning_rate(round_index)
        optimizer = torch.optim.Adam(module.parameters(), lr=lr)
        mode = effective_loss_mode(config, start_params.disentangled)

        x_all, mask_all = stack_slices(client.train, dtype=self.dtype)
        g_lo, g_hi = config.gamma_range
        trace: LossTrace = []

        for epoch, batches in enumerate(self._schedule(len(client.train), rng)):
            sums = {"rec": 0.0, "scl": 0.0, "lol": 0.0, "total": 0.0}
            for batch in batches:
                index = torch.as_tensor(batch, dtype=torch.long)
                xb, mb = x_all[index], mask_all[index]
                if start_params.disentangled:
                    gamma = torch.as_tensor(rng.uniform(g_lo, g_hi, size=len(batch)), dtype=self.dtype)
                    x_rec, triple = module.forward_train(xb, gamma, mb)
                else:
                    x_rec, triple = module(xb), None
                terms = loss_breakdown(xb, x_rec, triple, config.loss_weights, mode)

                optimizer.zero_grad()
                terms.total.backward()
                optimizer.step()

                for key in sums:
                    sums[key] += float(getattr(terms, key).detach())
            n_batches = max(len(batches), 1)
            record = {key: value / n_batches for key, value in sums.items()}
            record["epoch"] = epoch
            trace.append(record)
            logger.debug(
                "client=%s round=%d epoch=%d lr=%.3g total=%.5f rec=%.5f",
                client.client_id, round_index, epoch, lr, record["total"], record["rec"],
            )

        params = ModelParams.from_module(
            module, start_params.arch, start_params.disentangled,
            owner=client.client_id, seed=start_params.seed,
        )
        return params, trace


def local_update(
    client: ClientDataset,
    start_params: ModelParams,
    config: FederationConfig,
    round_index: int,
) -> Tuple[ModelParams, LossTrace]:
    """Functional wrapper around LocalTrainer.local_update."""
    return LocalTrainer(config).local_update(client, start_params, round_index)


def evaluate_reconstruction(
    params: ModelParams, slices: List[ScanSlice], batch_size: int = 32
) -> float:
    """Evaluation-mode mean absolute reconstruction error over all pixels."""
    if not slices:
        return float("nan")
    module = build_module(params)
    x_all, _ = stack_slices(slices)
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(slices), batch_size):
            xb = x_all[start:start + batch_size]
            total += float((module(xb) - xb).abs().sum())
            count += xb.numel()
    return total / count
