#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Network Package

Disentangled autoencoder and its tagged parameter tree.

MIT License
See LICENSE file for full license text.
"""

from .params import ModelParams, ParamLeaf, SHAPE_PATHS, APPEARANCE_PATHS
from .autoencoder import (
    DisentangledAutoencoder,
    LatentTriple,
    init_model,
    build_module,
    encode,
    decode,
    reconstruct,
    gamma_augment,
    gamma_shift,
    forward_train,
)

__all__ = [
    "ModelParams",
    "ParamLeaf",
    "SHAPE_PATHS",
    "APPEARANCE_PATHS",
    "DisentangledAutoencoder",
    "LatentTriple",
    "init_model",
    "build_module",
    "encode",
    "decode",
    "reconstruct",
    "gamma_augment",
    "gamma_shift",
    "forward_train",
]
