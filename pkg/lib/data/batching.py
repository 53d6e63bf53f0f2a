#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Batching

Stacks slices into tensors and builds minibatch schedules.

MIT License
See LICENSE file for full license text.
"""

from typing import List, Tuple

import numpy as np
import torch

from ..models import ScanSlice


def stack_slices(
    slices: List[ScanSlice], dtype: torch.dtype = torch.float32
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Stack pixels and brain masks as (N, 1, H, W) tensors."""
    pixels = np.stack([s.pixels for s in slices])[:, None]
    masks = np.stack([s.brain_mask for s in slices])[:, None]
    return torch.as_tensor(pixels, dtype=dtype), torch.as_tensor(masks.astype(np.float64), dtype=dtype)


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled minibatch indices covering every sample once."""
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def resampled_batches(
    n: int, batch_size: int, iterations: int, rng: np.random.Generator
) -> List[np.ndarray]:
    """Uniformly resampled minibatches (with replacement) for virtual clients."""
    return [rng.integers(0, n, size=min(batch_size, n)) for _ in range(iterations)]
