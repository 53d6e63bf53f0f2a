#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Checkpoint Service

Parameter archives (.npz, little-endian float32) with a JSON sidecar that
records architecture, leaf tags and ownership, plus whole federation states
for resumable training.

MIT License
See LICENSE file for full license text.
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List

import numpy as np

from ..models import RoundRecord
from ..models.config import ArchConfig
from ..network.params import ModelParams, ParamLeaf
from .manifest_service import load_json, save_json

logger = logging.getLogger(__name__)

ARCHIVE_DTYPE = "<f4"


def _save_arrays(path: Path, arrays: Dict[str, np.ndarray]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "wb") as f:
            np.savez(f, **{name: np.asarray(a, dtype=ARCHIVE_DTYPE) for name, a in arrays.items()})
    except OSError as e:
        logger.error("Failed to write %s: %s", path, e)
        raise


def _load_arrays(path: Path) -> Dict[str, np.ndarray]:
    if not path.exists():
        raise FileNotFoundError(f"Missing checkpoint archive: {path}")
    with np.load(path) as archive:
        return {name: archive[name].astype(np.float32) for name in archive.files}


class CheckpointService:
    """Saves and loads parameter trees and federation states."""

    def __init__(self, root: str):
        self.root = Path(root)

    def save(self, params: ModelParams, name: str) -> List[Path]:
        """Write <name>.npz and <name>.json under the checkpoint root."""
        archive = self.root / f"{name}.npz"
        sidecar = self.root / f"{name}.json"
        _save_arrays(archive, {n: leaf.values for n, leaf in params.leaves.items()})
        save_json(sidecar, {
            "arch": params.arch.to_dict(),
            "disentangled": params.disentangled,
            "owner": params.owner,
            "seed": params.seed,
            "checksum": params.checksum(),
            "leaves": {n: {"path": l.path, "kind": l.kind, "shape": list(l.shape)} for n, l in params.leaves.items()},
        })
        logger.debug("Saved checkpoint %s", archive)
        return [archive, sidecar]

    def load(self, name: str) -> ModelParams:
        """Load a parameter tree written by save()."""
        meta = load_json(self.root / f"{name}.json")
        arrays = _load_arrays(self.root / f"{name}.npz")
        leaves = {
            n: ParamLeaf(path=info["path"], kind=info["kind"], values=arrays[n].reshape(info["shape"]))
            for n, info in meta["leaves"].items()
        }
        return ModelParams(
            arch=ArchConfig.from_dict(meta["arch"]),
            disentangled=meta["disentangled"],
            leaves=leaves,
            owner=meta["owner"],
            seed=meta["seed"],
        )

    def save_state(self, state, name: str = "state") -> List[Path]:
        """Persist a FederationState: global model, per-client models/retained leaves, history."""
        base = self.root / name
        written = self.save(state.global_params, f"{name}/global")
        for cid in state.client_ids:
            if state.strategy == "local_only":
                written += self.save(state.client_params[cid], f"{name}/clients/{cid}")
            if state.retained.get(cid):
                archive = base / "retained" / f"{cid}.npz"
                _save_arrays(archive, state.retained[cid])
                written.append(archive)
        summary = base / "state.json"
        save_json(summary, {
            "strategy": state.strategy,
            "client_ids": list(state.client_ids),
            "weights": list(state.weights),
            "rounds_completed": state.rounds_completed,
            "history": [asdict(record) for record in state.history],
        })
        written.append(summary)
        logger.info("Saved %s state after round %d to %s", state.strategy, state.rounds_completed, base)
        return written

    def load_state(self, name: str = "state"):
        """Rebuild the FederationState written by save_state()."""
        from ..training.federation import FederationState

        base = self.root / name
        summary = load_json(base / "state.json")
        global_params = self.load(f"{name}/global")
        client_params, retained = {}, {}
        for cid in summary["client_ids"]:
            if summary["strategy"] == "local_only":
                client_params[cid] = self.load(f"{name}/clients/{cid}")
            else:
                client_params[cid] = global_params.copy(owner=cid)
            archive = base / "retained" / f"{cid}.npz"
            if archive.exists():
                retained[cid] = _load_arrays(archive)
        return FederationState(
            strategy=summary["strategy"],
            global_params=global_params,
            client_ids=summary["client_ids"],
            weights=summary["weights"],
            client_params=client_params,
            retained=retained,
            history=[RoundRecord(**record) for record in summary["history"]],
            rounds_completed=summary["rounds_completed"],
        )

    def has_state(self, name: str = "state") -> bool:
        return (self.root / name / "state.json").exists()
