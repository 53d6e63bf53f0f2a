#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Models Package

Domain data structures and configuration models.

MIT License
See LICENSE file for full license text.
"""

from .models import (
    AppearanceProfile,
    ScanSlice,
    ClientDataset,
    Component,
    ResidualMap,
    SegmentationMask,
    RoundRecord,
    EmbeddingRecord,
    RunManifest,
)
from .config import (
    LesionSpec,
    SiteSpec,
    DataSpec,
    ArchConfig,
    LossWeights,
    FederationConfig,
    PostprocessConfig,
    MetricsConfig,
    ExperimentConfig,
    STRATEGIES,
    LOSS_MODES,
)

__all__ = [
    # Domain models
    "AppearanceProfile",
    "ScanSlice",
    "ClientDataset",
    "Component",
    "ResidualMap",
    "SegmentationMask",
    "RoundRecord",
    "EmbeddingRecord",
    "RunManifest",
    # Configuration
    "LesionSpec",
    "SiteSpec",
    "DataSpec",
    "ArchConfig",
    "LossWeights",
    "FederationConfig",
    "PostprocessConfig",
    "MetricsConfig",
    "ExperimentConfig",
    "STRATEGIES",
    "LOSS_MODES",
]
