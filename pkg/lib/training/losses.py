#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Losses

Reconstruction loss, Gaussian KL between latent embeddings, the latent
contrastive loss (shape consistency + latent orthogonality) and the
weighted training objective with its ablation modes.

The encoder is deterministic, so the distribution of an embedding is
realized by fitting one Gaussian per channel over the spatial bottleneck
positions; KL terms use the closed form and average over channels.

MIT License
See LICENSE file for full license text.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import torch

from ..exceptions import ConfigurationError, ShapeError
from ..models.config import LOSS_MODES, LossWeights
from ..network.autoencoder import LatentTriple

VARIANCE_FLOOR = 1e-6


@dataclass
class LatentDistribution:
    """Per-sample, per-channel Gaussian fitted over spatial positions."""

    mean: torch.Tensor  # (B, C)
    variance: torch.Tensor  # (B, C)


class LatentLoss(NamedTuple):
    lcl: torch.Tensor
    scl: torch.Tensor
    lol: torch.Tensor


class LossBreakdown(NamedTuple):
    total: torch.Tensor
    rec: torch.Tensor
    scl: torch.Tensor
    lol: torch.Tensor


def _batched(z: torch.Tensor) -> torch.Tensor:
    if z.dim() == 3:
        z = z.unsqueeze(0)
    if z.dim() != 4:
        raise ShapeError(f"Embedding must be (C, h, w) or (B, C, h, w), got {tuple(z.shape)}")
    return z


def reconstruction_loss(x: torch.Tensor, x_rec: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over all pixels (and samples)."""
    if x.shape != x_rec.shape:
        raise ShapeError(f"Reconstruction shape {tuple(x_rec.shape)} != input shape {tuple(x.shape)}")
    return (x - x_rec).abs().mean()


def fit_latent_distribution(z: torch.Tensor, variance_floor: float = VARIANCE_FLOOR) -> LatentDistribution:
    """Per-channel sample mean and population variance over spatial positions."""
    z = _batched(z)
    flat = z.flatten(2)
    if flat.shape[-1] < 2:
        raise ShapeError("Embedding needs at least 2 spatial positions per channel")
    mean = flat.mean(dim=-1)
    variance = ((flat - mean.unsqueeze(-1)) ** 2).mean(dim=-1)
    return LatentDistribution(mean=mean, variance=variance.clamp(min=variance_floor))


def kl_embedding(z_a: torch.Tensor, z_b: torch.Tensor) -> torch.Tensor:
    """KL(fit(z_a) || fit(z_b)), averaged over channels then over the batch."""
    z_a, z_b = _batched(z_a), _batched(z_b)
    if z_a.shape[:2] != z_b.shape[:2]:
        raise ShapeError(
            f"Embeddings disagree on batch/channels: {tuple(z_a.shape)} vs {tuple(z_b.shape)}"
        )
    p = fit_latent_distribution(z_a)
    q = fit_latent_distribution(z_b)
    kl = 0.5 * (
        torch.log(q.variance / p.variance)
        + (p.variance + (p.mean - q.mean) ** 2) / q.variance
        - 1.0
    )
    return kl.mean(dim=1).mean()


def shape_consistency_loss(triple: LatentTriple) -> torch.Tensor:
    """SCL: KL between shape embeddings of the input and its gamma-shifted copy."""
    return kl_embedding(triple.z_s, triple.z_gs)


def latent_orthogonality_loss(triple: LatentTriple) -> torch.Tensor:
    """LOL: max(0, 1 - KL(z_A || z_S))."""
    return torch.clamp(1.0 - kl_embedding(triple.z_a, triple.z_s), min=0.0)


def latent_contrastive_loss(triple: LatentTriple, beta: float) -> LatentLoss:
    """beta * SCL + (1 - beta) * LOL, with both components."""
    scl = shape_consistency_loss(triple)
    lol = latent_orthogonality_loss(triple)
    return LatentLoss(lcl=beta * scl + (1.0 - beta) * lol, scl=scl, lol=lol)


def loss_breakdown(
    x: torch.Tensor,
    x_rec: torch.Tensor,
    triple: Optional[LatentTriple],
    weights: LossWeights,
    mode: str = "full",
) -> LossBreakdown:
    """Training objective and its terms for one of the ablation modes."""
    if mode not in LOSS_MODES:
        raise ConfigurationError(f"Unknown loss mode: {mode}")
    rec = reconstruction_loss(x, x_rec)
    zero = rec.new_zeros(())
    if mode == "no_LCL":
        return LossBreakdown(total=rec, rec=rec, scl=zero, lol=zero)
    if triple is None:
        raise ConfigurationError(f"Loss mode '{mode}' needs a latent triple")

    alpha = weights.alpha
    if mode == "full":
        latent = latent_contrastive_loss(triple, weights.beta)
        lcl, scl, lol = latent.lcl, latent.scl, latent.lol
    elif mode == "no_LOL":
        scl, lol = shape_consistency_loss(triple), zero
        lcl = scl
    else:  # no_SCL
        scl, lol = zero, latent_orthogonality_loss(triple)
        lcl = lol
    return LossBreakdown(total=alpha * rec + (1.0 - alpha) * lcl, rec=rec, scl=scl, lol=lol)


def total_loss(
    x: torch.Tensor,
    x_rec: torch.Tensor,
    triple: Optional[LatentTriple],
    weights: LossWeights,
    mode: str = "full",
) -> torch.Tensor:
    """alpha * L_Rec + (1 - alpha) * L_LCL (or the selected ablation)."""
    return loss_breakdown(x, x_rec, triple, weights, mode).total
