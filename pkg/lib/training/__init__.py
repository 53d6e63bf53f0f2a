#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Training Package

Losses, local client training, aggregation and the federation round loop.

MIT License
See LICENSE file for full license text.
"""

from .losses import (
    LossBreakdown,
    reconstruction_loss,
    kl_embedding,
    shape_consistency_loss,
    latent_orthogonality_loss,
    latent_contrastive_loss,
    loss_breakdown,
    total_loss,
)
from .local_trainer import LocalTrainer, local_update, evaluate_reconstruction
from .aggregation import aggregate, client_weights, build_inference_model, weighted_mean
from .federation import FederationRunner, FederationState, resolve_arch, run_federation

__all__ = [
    "LossBreakdown",
    "reconstruction_loss",
    "kl_embedding",
    "shape_consistency_loss",
    "latent_orthogonality_loss",
    "latent_contrastive_loss",
    "loss_breakdown",
    "total_loss",
    "LocalTrainer",
    "local_update",
    "evaluate_reconstruction",
    "aggregate",
    "client_weights",
    "build_inference_model",
    "weighted_mean",
    "FederationRunner",
    "FederationState",
    "resolve_arch",
    "run_federation",
]
