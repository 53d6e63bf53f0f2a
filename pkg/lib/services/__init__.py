#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Services Package

Persistence services for datasets, checkpoints and run manifests.

MIT License
See LICENSE file for full license text.
"""

from .dataset_store import DatasetStore
from .checkpoint_service import CheckpointService
from .manifest_service import ManifestService

__all__ = ["DatasetStore", "CheckpointService", "ManifestService"]
