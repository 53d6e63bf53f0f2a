#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Data Package

Synthetic multi-site phantom generation and batch assembly.

MIT License
See LICENSE file for full license text.
"""

from .phantom_generator import (
    generate_phantom_client,
    inject_lesions,
    normalize,
    build_site_datasets,
)
from .batching import stack_slices, epoch_batches, resampled_batches

__all__ = [
    "generate_phantom_client",
    "inject_lesions",
    "normalize",
    "build_site_datasets",
    "stack_slices",
    "epoch_batches",
    "resampled_batches",
]
