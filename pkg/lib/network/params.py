#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Model Parameters

Named parameter tree whose leaves carry a path tag (shape, appearance,
decoder_shape, decoder_appearance) and a kind (learnable, norm_statistic).
This is the unit exchanged between clients and the server.

MIT License
See LICENSE file for full license text.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import torch

from ..models.config import ArchConfig

PATH_TAGS = ("shape", "appearance", "decoder_shape", "decoder_appearance")
SHAPE_PATHS = frozenset({"shape", "decoder_shape"})
APPEARANCE_PATHS = frozenset({"appearance", "decoder_appearance"})
KINDS = ("learnable", "norm_statistic")
NORM_STATISTIC_SUFFIXES = ("running_mean", "running_var")


def path_tag(name: str) -> str:
    """Path tag of a parameter from its module name."""
    if name.startswith("shape_encoder."):
        return "shape"
    if name.startswith("appearance_encoder."):
        return "appearance"
    if ".appearance." in name or name.startswith("head_appearance."):
        return "decoder_appearance"
    return "decoder_shape"


@dataclass
class ParamLeaf:
    """One tagged array of the parameter tree."""

    path: str
    kind: str
    values: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def is_shape(self) -> bool:
        return self.path in SHAPE_PATHS

    def with_values(self, values: np.ndarray) -> "ParamLeaf":
        return ParamLeaf(path=self.path, kind=self.kind, values=values)


@dataclass
class ModelParams:
    """Parameter tree of one autoencoder instance.

    theta_S is the set of leaves tagged shape/decoder_shape, theta_A the
    leaves tagged appearance/decoder_appearance.
    """

    arch: ArchConfig
    disentangled: bool
    leaves: Dict[str, ParamLeaf] = field(default_factory=dict)
    owner: str = "global"
    seed: int = 0

    def names(self, paths: Optional[Iterable[str]] = None, kind: Optional[str] = None) -> List[str]:
        """Leaf names filtered by path tags and kind, in tree order."""
        path_set = set(paths) if paths is not None else None
        return [
            name for name, leaf in self.leaves.items()
            if (path_set is None or leaf.path in path_set) and (kind is None or leaf.kind == kind)
        ]

    def shape_names(self) -> List[str]:
        return self.names(SHAPE_PATHS)

    def appearance_names(self) -> List[str]:
        return self.names(APPEARANCE_PATHS)

    def partition(self) -> Tuple[Dict[str, ParamLeaf], Dict[str, ParamLeaf]]:
        """Split into (theta_S, theta_A) leaf dictionaries."""
        theta_s = {n: self.leaves[n] for n in self.shape_names()}
        theta_a = {n: self.leaves[n] for n in self.appearance_names()}
        return theta_s, theta_a

    def structure(self) -> Tuple[Tuple[str, str, str, Tuple[int, ...]], ...]:
        """Hashable description used to check trees are structurally identical."""
        return tuple((n, l.path, l.kind, l.shape) for n, l in self.leaves.items())

    def count_learnable(self) -> int:
        return int(sum(self.leaves[n].values.size for n in self.names(kind="learnable")))

    def copy(self, owner: Optional[str] = None) -> "ModelParams":
        return ModelParams(
            arch=self.arch,
            disentangled=self.disentangled,
            leaves={n: l.with_values(l.values.copy()) for n, l in self.leaves.items()},
            owner=self.owner if owner is None else owner,
            seed=self.seed,
        )

    def replace(self, values: Dict[str, np.ndarray], owner: Optional[str] = None) -> "ModelParams":
        """Copy with some leaves swapped for new values."""
        params = self.copy(owner)
        for name, array in values.items():
            params.leaves[name] = params.leaves[name].with_values(np.array(array, copy=True))
        return params

    def checksum(self) -> str:
        """SHA-256 over leaf names and raw bytes."""
        digest = hashlib.sha256()
        for name in sorted(self.leaves):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.leaves[name].values).tobytes())
        return digest.hexdigest()

    def to_state_dict(self, dtype: torch.dtype = torch.float32) -> Dict[str, torch.Tensor]:
        return {n: torch.tensor(l.values, dtype=dtype) for n, l in self.leaves.items()}

    @classmethod
    def from_module(
        cls,
        module: torch.nn.Module,
        arch: ArchConfig,
        disentangled: bool,
        owner: str = "global",
        seed: int = 0,
    ) -> "ModelParams":
        """Snapshot a module's parameters and running statistics."""
        leaves: Dict[str, ParamLeaf] = {}
        for name, tensor in module.state_dict().items():
            if name.endswith("num_batches_tracked"):
                continue
            kind = "norm_statistic" if name.endswith(NORM_STATISTIC_SUFFIXES) else "learnable"
            leaves[name] = ParamLeaf(
                path=path_tag(name),
                kind=kind,
                values=tensor.detach().cpu().numpy().copy(),
            )
        return cls(arch=arch, disentangled=disentangled, leaves=leaves, owner=owner, seed=seed)
