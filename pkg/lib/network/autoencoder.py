#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Disentangled Autoencoder

Convolutional autoencoder with a shape encoder path, an appearance encoder
path and one decoder fed by the channel-wise concatenation of both latents.
Each decoder layer is split into a shape half and an appearance half so the
theta_S / theta_A partition covers the whole network. With
disentangled=False the same class builds the single-path baseline AE.

MIT License
See LICENSE file for full license text.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..exceptions import ConfigurationError, ShapeError
from ..models import ScanSlice
from ..models.config import ArchConfig
from .params import ModelParams

logger = logging.getLogger(__name__)

WIDTH_ALIGN = 8
PATH_SCALE = 1.0 / math.sqrt(2.0)  # each disentangled path holds ~half the encoder parameters
NUM_STAGES = 4


def stage_widths(arch: ArchConfig, scale: float = 1.0) -> List[int]:
    """Encoder stage widths interpolating base_filters -> max_filters."""
    widths = []
    for i in range(NUM_STAGES):
        width = arch.base_filters + (arch.max_filters - arch.base_filters) * i / (NUM_STAGES - 1)
        widths.append(max(WIDTH_ALIGN, int(round(width * scale / WIDTH_ALIGN)) * WIDTH_ALIGN))
    return widths


def make_norm(arch: ArchConfig, channels: int) -> nn.Module:
    if arch.norm_kind == "group":
        if channels % arch.group_count:
            raise ConfigurationError(
                f"{channels} channels not divisible by group_count={arch.group_count}"
            )
        return nn.GroupNorm(arch.group_count, channels)
    return nn.BatchNorm2d(channels)


def _conv_block(arch: ArchConfig, in_ch: int, out_ch: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1),
        make_norm(arch, out_ch),
        nn.LeakyReLU(0.2),
    )


class Encoder(nn.Module):
    """Four stride-2 conv-norm-activation stages and a linear 1x1 projection."""

    def __init__(self, arch: ArchConfig, widths: List[int], out_channels: int):
        super().__init__()
        stages = []
        in_ch = 1
        for width in widths:
            stages.append(_conv_block(arch, in_ch, width, stride=2))
            in_ch = width
        self.stages = nn.Sequential(*stages)
        self.project = nn.Conv2d(in_ch, out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.project(self.stages(x))


class DecoderBlock(nn.Module):
    """Upsample x2 then conv-norm-activation, optionally split into two halves."""

    def __init__(self, arch: ArchConfig, in_ch: int, out_ch: int, split: bool):
        super().__init__()
        if split:
            self.shape = _conv_block(arch, in_ch, out_ch // 2)
            self.appearance = _conv_block(arch, in_ch, out_ch // 2)
        else:
            self.shape = _conv_block(arch, in_ch, out_ch)
            self.appearance = None

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        out = self.shape(h)
        if self.appearance is not None:
            out = torch.cat([out, self.appearance(h)], dim=1)
        return out


class LatentDropout(nn.Module):
    """Dropout on the bottleneck drawing from a per-instance generator."""

    def __init__(self, p: float):
        super().__init__()
        self.p = p
        self.generator: Optional[torch.Generator] = None

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if not self.training or self.p == 0.0:
            return z
        keep = torch.full_like(z, 1.0 - self.p)
        return z * torch.bernoulli(keep, generator=self.generator) / (1.0 - self.p)


@dataclass
class LatentTriple:
    """Bottleneck embeddings z_S, z_A and z_gS (shape of the gamma-shifted input)."""

    z_s: torch.Tensor
    z_a: torch.Tensor
    z_gs: torch.Tensor


class DisentangledAutoencoder(nn.Module):
    """Shape/appearance autoencoder (or single-path baseline)."""

    def __init__(self, arch: ArchConfig, disentangled: bool = True):
        super().__init__()
        arch.validate()
        if disentangled and arch.bottleneck_channels % 2:
            raise ConfigurationError(
                f"bottleneck_channels={arch.bottleneck_channels} must be even for a disentangled model"
            )
        self.arch = arch
        self.disentangled = disentangled

        widths = stage_widths(arch)
        if disentangled:
            path_widths = stage_widths(arch, PATH_SCALE)
            half = arch.bottleneck_channels // 2
            self.shape_encoder = Encoder(arch, path_widths, half)
            self.appearance_encoder = Encoder(arch, path_widths, half)
        else:
            self.shape_encoder = Encoder(arch, widths, arch.bottleneck_channels)
            self.appearance_encoder = None

        self.dropout = LatentDropout(arch.dropout)
        blocks = []
        in_ch = arch.bottleneck_channels
        for width in reversed(widths):
            blocks.append(DecoderBlock(arch, in_ch, width, split=disentangled))
            in_ch = width
        self.decoder = nn.ModuleList(blocks)

        if disentangled:
            self.head_shape = nn.Conv2d(in_ch // 2, 1, kernel_size=3, padding=1)
            self.head_appearance = nn.Conv2d(in_ch // 2, 1, kernel_size=3, padding=1, bias=False)
        else:
            self.head_shape = nn.Conv2d(in_ch, 1, kernel_size=3, padding=1)
            self.head_appearance = None

    @property
    def path_channels(self) -> Tuple[int, int]:
        """(C_S, C_A)."""
        if self.disentangled:
            half = self.arch.bottleneck_channels // 2
            return half, half
        return self.arch.bottleneck_channels, 0

    def check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 4 or x.shape[1] != 1 or tuple(x.shape[2:]) != tuple(self.arch.input_size):
            raise ShapeError(
                f"Expected input (B, 1, {self.arch.input_size[0]}, {self.arch.input_size[1]}), "
                f"got {tuple(x.shape)}"
            )

    def encode(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_input(x)
        z_s = self.shape_encoder(x)
        if self.appearance_encoder is not None:
            z_a = self.appearance_encoder(x)
        else:
            z_a = z_s.new_zeros((z_s.shape[0], 0) + tuple(z_s.shape[2:]))
        return z_s, z_a

    def decode(self, z_s: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
        c_s, c_a = self.path_channels
        expected = tuple(self.arch.bottleneck_size)
        if (
            z_s.dim() != 4 or z_a.dim() != 4
            or z_s.shape[1] != c_s or z_a.shape[1] != c_a
            or tuple(z_s.shape[2:]) != expected or tuple(z_a.shape[2:]) != expected
            or z_s.shape[0] != z_a.shape[0]
        ):
            raise ShapeError(
                f"Latents {tuple(z_s.shape)}/{tuple(z_a.shape)} do not match "
                f"bottleneck ({c_s}+{c_a}, {expected[0]}, {expected[1]})"
            )
        h = self.dropout(torch.cat([z_s, z_a], dim=1))
        for block in self.decoder:
            h = block(h)
        if self.head_appearance is not None:
            half = h.shape[1] // 2
            logits = self.head_shape(h[:, :half]) + self.head_appearance(h[:, half:])
        else:
            logits = self.head_shape(h)
        return torch.sigmoid(logits)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z_s, z_a = self.encode(x)
        return self.decode(z_s, z_a)

    def forward_train(
        self, x: torch.Tensor, gamma: Union[float, torch.Tensor], mask: Optional[torch.Tensor] = None
    ) -> Tuple[torch.Tensor, LatentTriple]:
        """Reconstruct x and encode the shape of its gamma-shifted copy."""
        z_s, z_a = self.encode(x)
        z_gs = self.shape_encoder(gamma_shift(x, gamma, mask))
        return self.decode(z_s, z_a), LatentTriple(z_s=z_s, z_a=z_a, z_gs=z_gs)


def gamma_shift(
    x: torch.Tensor, gamma: Union[float, torch.Tensor], mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Pixelwise x**gamma inside the mask (per-sample gamma when a tensor)."""
    if isinstance(gamma, torch.Tensor):
        if torch.any(gamma <= 0):
            raise ConfigurationError("gamma must be positive")
        gamma = gamma.to(x.dtype).reshape(-1, *([1] * (x.dim() - 1)))
    elif gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    shifted = torch.pow(x.clamp(min=0.0), gamma)
    if mask is None:
        return shifted
    return torch.where(mask.bool(), shifted, x)


# ---------------------------------------------------------------------------
# Functional interface over ModelParams
# ---------------------------------------------------------------------------


def init_model(arch: ArchConfig, seed: int, disentangled: bool = True) -> ModelParams:
    """Deterministically initialize a model and return its tagged parameters."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        module = DisentangledAutoencoder(arch, disentangled)
    params = ModelParams.from_module(module, arch, disentangled, owner="global", seed=seed)
    logger.debug(
        "Initialized %s model: %d learnable parameters",
        "disentangled" if disentangled else "baseline", params.count_learnable(),
    )
    return params


def build_module(
    params: ModelParams, dtype: torch.dtype = torch.float32, train: bool = False
) -> DisentangledAutoencoder:
    """Instantiate a module carrying the given parameters."""
    module = DisentangledAutoencoder(params.arch, params.disentangled).to(dtype)
    missing, unexpected = module.load_state_dict(params.to_state_dict(dtype), strict=False)
    missing = [k for k in missing if not k.endswith("num_batches_tracked")]
    if missing or unexpected:
        raise ShapeError(f"Parameter tree mismatch: missing={missing}, unexpected={unexpected}")
    module.train(train)
    return module


def as_batch(x: Union[ScanSlice, np.ndarray, torch.Tensor], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Convert a slice, H×W array or tensor into a (B, 1, H, W) tensor."""
    if isinstance(x, ScanSlice):
        x = x.pixels
    if not isinstance(x, torch.Tensor):
        x = np.asarray(x, dtype=np.float64)
    tensor = torch.as_tensor(x, dtype=dtype)
    while tensor.dim() < 4:
        tensor = tensor.unsqueeze(0)
    return tensor


def encode(params: ModelParams, x: Union[ScanSlice, np.ndarray, torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
    """Evaluation-mode encoding into (z_S, z_A)."""
    module = build_module(params)
    with torch.no_grad():
        return module.encode(as_batch(x))


def decode(params: ModelParams, z_s: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
    """Evaluation-mode decoding to a reconstruction in [0,1]."""
    module = build_module(params)
    with torch.no_grad():
        return module.decode(z_s, z_a)


def reconstruct(params: ModelParams, x: Union[ScanSlice, np.ndarray, torch.Tensor]) -> np.ndarray:
    """decode(encode(x)) as an H×W (or B×H×W) array."""
    module = build_module(params)
    with torch.no_grad():
        out = module(as_batch(x))
    return out[:, 0].numpy().squeeze(0) if out.shape[0] == 1 else out[:, 0].numpy()


def gamma_augment(x: ScanSlice, gamma: float) -> ScanSlice:
    """Gamma-shift the in-mask pixels of a slice; masks are unchanged."""
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    pixels = np.where(x.brain_mask, np.power(np.clip(x.pixels, 0.0, None), gamma), x.pixels)
    return x.with_pixels(pixels)


def forward_train(
    params: ModelParams, x: Union[ScanSlice, np.ndarray, torch.Tensor], gamma: float
) -> Tuple[torch.Tensor, LatentTriple]:
    """Evaluation-mode forward pass producing the reconstruction and latent triple."""
    mask = None
    if isinstance(x, ScanSlice):
        mask = as_batch(x.brain_mask.astype(np.float32))
    module = build_module(params)
    with torch.no_grad():
        return module.forward_train(as_batch(x), gamma, mask)
