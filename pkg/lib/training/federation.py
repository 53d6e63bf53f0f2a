#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Federation Runner

Round loop of the simulated federation: broadcast, local updates (optionally
in parallel), aggregation and per-round bookkeeping.

MIT License
See LICENSE file for full license text.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError
from ..models import AppearanceProfile, ClientDataset, RoundRecord
from ..models.config import LOSS_MODES, STRATEGIES, ArchConfig, FederationConfig
from ..network.autoencoder import init_model
from ..network.params import ModelParams
from ..utils.seeding import derive_seed
from .aggregation import aggregate, broadcast, build_inference_model, client_weights
from .local_trainer import LocalTrainer, LossTrace, evaluate_reconstruction

logger = logging.getLogger(__name__)

CENTRALIZED_ID = "centralized"


@dataclass
class FederationState:
    """Server-side state of a federation run.

    global_params holds the full global model. Under feddis only its shape
    leaves are broadcast; its appearance leaves carry the weighted mean of the
    clients' retained leaves. ADAM moments are rebuilt every round, so no
    optimizer state is kept between rounds.
    """

    strategy: str
    global_params: ModelParams
    client_ids: List[str]
    weights: List[float]
    client_params: Dict[str, ModelParams] = field(default_factory=dict)
    retained: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    history: List[RoundRecord] = field(default_factory=list)
    rounds_completed: int = 0

    @property
    def global_shape(self) -> Dict[str, np.ndarray]:
        """theta_S of the global model."""
        return {n: self.global_params.leaves[n].values for n in self.global_params.shape_names()}

    def start_params(self, client_id: str) -> ModelParams:
        """Parameters a client starts the next round from."""
        if self.strategy == "local_only":
            return self.client_params[client_id].copy()
        return broadcast(self.global_params, self.retained.get(client_id), client_id)

    def models(self) -> Dict[str, ModelParams]:
        """Evaluation models keyed by label (one per client for local_only)."""
        if self.strategy == "local_only":
            return {f"local_only/{cid}": self.client_params[cid] for cid in self.client_ids}
        return {self.strategy: build_inference_model(self)}


def resolve_arch(strategy: str, arch: ArchConfig, loss_mode: str = "full") -> Tuple[ArchConfig, bool]:
    """Model variant for a strategy as (arch, disentangled)."""
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"Unknown strategy: {strategy}")
    if loss_mode not in LOSS_MODES:
        raise ConfigurationError(f"Unknown loss mode: {loss_mode}")
    if strategy == "feddis":
        return arch, True
    if strategy == "fedgn":
        return replace(arch, norm_kind="group"), False
    return replace(arch, norm_kind="batch"), False


def pool_clients(clients: List[ClientDataset], seed: int) -> ClientDataset:
    """Pool every client's splits into one virtual data-lake client."""
    ordered = sorted(clients, key=lambda c: c.client_id)
    return ClientDataset(
        client_id=CENTRALIZED_ID,
        train=[s for c in ordered for s in c.train],
        val=[s for c in ordered for s in c.val],
        test=[s for c in ordered for s in c.test],
        profile=AppearanceProfile(),
        seed=seed,
    )


class FederationRunner:
    """Runs a whole federation for one strategy."""

    def __init__(
        self,
        config: FederationConfig,
        arch: ArchConfig,
        on_round_end: Optional[Callable[[FederationState], None]] = None,
    ):
        config.validate()
        self.config = config
        self.arch, self.disentangled = resolve_arch(config.strategy, arch, config.loss_mode)
        self.on_round_end = on_round_end

    def _prepare_clients(self, clients: List[ClientDataset]) -> List[ClientDataset]:
        if not clients:
            raise ConfigurationError("At least one client is required")
        ids = [c.client_id for c in clients]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"Duplicate client ids: {ids}")
        for client in clients:
            if not client.train:
                raise ConfigurationError(f"Client {client.client_id} has an empty train split")
        if self.config.strategy == "centralized":
            clients = [pool_clients(clients, self.config.seed)]
        return sorted(clients, key=lambda c: c.client_id)

    def _trainer_config(self, clients: List[ClientDataset]) -> FederationConfig:
        config = self.config
        if config.strategy == "fedvc" and config.fedvc_virtual_size is None:
            virtual_size = max(1, min(c.n_train for c in clients) // config.batch_size)
            logger.info("FedVC virtual client size: %d iterations per round", virtual_size)
            return replace(config, fedvc_virtual_size=virtual_size)
        return config

    def initial_state(self, clients: List[ClientDataset]) -> FederationState:
        """Seeded initialization shared by every client."""
        init = init_model(self.arch, derive_seed(self.config.seed, "init"), self.disentangled)
        return FederationState(
            strategy=self.config.strategy,
            global_params=init,
            client_ids=[c.client_id for c in clients],
            weights=client_weights(clients),
            client_params={c.client_id: init.copy(owner=c.client_id) for c in clients},
        )

    def run(
        self, clients: List[ClientDataset], state: Optional[FederationState] = None
    ) -> FederationState:
        """Execute the remaining rounds (all of them for a fresh state).

        Args:
            clients: Client datasets (pooled first for the centralized strategy)
            state: Optional state to resume from

        Returns:
            Final FederationState with one RoundRecord per completed round
        """
        clients = self._prepare_clients(clients)
        trainer = LocalTrainer(self._trainer_config(clients))
        if state is None:
            state = self.initial_state(clients)
        by_id = {c.client_id: c for c in clients}

        logger.info(
            "Starting %s federation: %d clients, %d rounds (from round %d)",
            state.strategy, len(clients), self.config.rounds, state.rounds_completed,
        )
        for round_index in range(state.rounds_completed, self.config.rounds):
            self.run_round(state, by_id, trainer, round_index)
            if self.on_round_end is not None:
                self.on_round_end(state)
        return state

    def _local_updates(
        self,
        state: FederationState,
        by_id: Dict[str, ClientDataset],
        trainer: LocalTrainer,
        round_index: int,
    ) -> List[Tuple[ModelParams, LossTrace]]:
        starts = [state.start_params(cid) for cid in state.client_ids]

        def work(i: int) -> Tuple[ModelParams, LossTrace]:
            cid = state.client_ids[i]
            return trainer.local_update(by_id[cid], starts[i], round_index)

        indices = range(len(state.client_ids))
        if self.config.max_workers > 1 and len(state.client_ids) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
                return list(pool.map(work, indices))
        return [work(i) for i in indices]

    def run_round(
        self,
        state: FederationState,
        by_id: Dict[str, ClientDataset],
        trainer: LocalTrainer,
        round_index: int,
    ) -> RoundRecord:
        """Broadcast, train every client, aggregate and record one round."""
        started = time.perf_counter()
        results = self._local_updates(state, by_id, trainer, round_index)
        updated = [params for params, _ in results]

        for params in updated:
            state.client_params[params.owner] = params
        if state.strategy != "local_only":
            global_params, retained = aggregate(state.strategy, updated, state.weights)
            state.global_params = global_params
            state.retained = {p.owner: r for p, r in zip(updated, retained)}
        state.rounds_completed = round_index + 1

        client_losses = {
            cid: (trace[-1] if trace else {}) for cid, (_, trace) in zip(state.client_ids, results)
        }
        record = RoundRecord(
            round_index=round_index,
            client_losses=client_losses,
            val_rec_loss=self._validation_loss(state, by_id),
            wall_clock=time.perf_counter() - started,
            checksum=self._checksum(state),
        )
        state.history.append(record)
        logger.info(
            "Round %d/%d: mean client loss %.5f, validation L_Rec %.5f (%.1fs)",
            round_index + 1, self.config.rounds, record.mean_client_loss(),
            record.val_rec_loss, record.wall_clock,
        )
        return record

    def _validation_loss(self, state: FederationState, by_id: Dict[str, ClientDataset]) -> float:
        if state.strategy == "local_only":
            losses = [
                evaluate_reconstruction(state.client_params[cid], by_id[cid].val)
                for cid in state.client_ids if by_id[cid].val
            ]
            return float(np.mean(losses)) if losses else float("nan")
        pooled = [s for cid in state.client_ids for s in by_id[cid].val]
        return evaluate_reconstruction(build_inference_model(state), pooled)

    @staticmethod
    def _checksum(state: FederationState) -> str:
        if state.strategy == "local_only":
            return "|".join(state.client_params[cid].checksum()[:16] for cid in state.client_ids)
        return state.global_params.checksum()


def run_federation(
    clients: List[ClientDataset],
    config: FederationConfig,
    arch: Optional[ArchConfig] = None,
    on_round_end: Optional[Callable[[FederationState], None]] = None,
) -> FederationState:
    """Run every round of a federation and return the final state."""
    if arch is None:
        arch = ArchConfig(input_size=clients[0].train[0].size if clients and clients[0].train else (128, 128))
    return FederationRunner(config, arch, on_round_end).run(clients)
