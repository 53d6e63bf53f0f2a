#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Anomaly Segmentation

Residual maps and the post-processing chain that turns them into binary
anomaly segmentations: erode the brain mask, keep positive residuals,
median filter, threshold at a per-image percentile, then drop small
connected components.

MIT License
See LICENSE file for full license text.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import torch
from PIL import Image
from scipy import ndimage

from ..data.batching import stack_slices
from ..exceptions import ShapeError
from ..models import Component, PostprocessConfig, ResidualMap, ScanSlice, SegmentationMask
from ..network.autoencoder import build_module
from ..network.params import ModelParams

logger = logging.getLogger(__name__)

CROSS = ndimage.generate_binary_structure(2, 1)
SQUARE = ndimage.generate_binary_structure(2, 2)


def residual(x: Union[ScanSlice, np.ndarray], x_rec: np.ndarray) -> ResidualMap:
    """Signed residual x - x_rec."""
    pixels = x.pixels if isinstance(x, ScanSlice) else np.asarray(x)
    x_rec = np.asarray(x_rec)
    if pixels.shape != x_rec.shape:
        raise ShapeError(f"Residual operands differ: {pixels.shape} vs {x_rec.shape}")
    slice_id = x.slice_id if isinstance(x, ScanSlice) else ""
    return ResidualMap(values=pixels.astype(np.float64) - x_rec.astype(np.float64), slice_id=slice_id)


def erode_mask(brain_mask: np.ndarray, radius: int) -> np.ndarray:
    """Erode with a 3x3 cross, `radius` iterations."""
    mask = np.asarray(brain_mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    return ndimage.binary_erosion(mask, structure=CROSS, iterations=radius)


def label_components(binary: np.ndarray, connectivity: int = 8):
    """Label connected components; returns (labels, count)."""
    structure = SQUARE if connectivity == 8 else CROSS
    return ndimage.label(binary, structure=structure)


def postprocess(
    r: ResidualMap, brain_mask: np.ndarray, config: Optional[PostprocessConfig] = None
) -> SegmentationMask:
    """Binarize a residual map.

    Args:
        r: Residual map
        brain_mask: Brain mask of the source slice
        config: Post-processing parameters

    Returns:
        SegmentationMask whose components all have area >= min_area
    """
    config = config or PostprocessConfig()
    config.validate()
    values = np.asarray(r.values, dtype=np.float64)
    if values.shape != np.shape(brain_mask):
        raise ShapeError(f"Residual {values.shape} and brain mask {np.shape(brain_mask)} differ")

    eroded = erode_mask(brain_mask, config.erosion_radius)
    if not eroded.any():
        logger.warning("Eroded brain mask of %s is empty; returning an empty segmentation", r.slice_id or "slice")
        return SegmentationMask(mask=np.zeros(values.shape, dtype=bool), slice_id=r.slice_id, status="empty_mask")

    gated = np.clip(values * eroded, 0.0, None)
    filtered = ndimage.median_filter(gated, size=config.median_size, mode="reflect")
    threshold = np.percentile(filtered[eroded], config.percentile)
    binary = (filtered > threshold) & eroded

    labels, count = label_components(binary, config.connectivity)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    keep = areas >= config.min_area
    keep[0] = False
    mask = keep[labels]

    components: List[Component] = []
    relabeled, n_kept = label_components(mask, config.connectivity)
    for label, window in enumerate(ndimage.find_objects(relabeled), start=1):
        area = int((relabeled[window] == label).sum())
        bbox = (window[0].start, window[1].start, window[0].stop, window[1].stop)
        components.append(Component(label=label, area=area, bbox=bbox))
    return SegmentationMask(mask=mask, components=components, slice_id=r.slice_id)


def _reconstruct_batch(model: ModelParams, slices: List[ScanSlice], batch_size: int) -> np.ndarray:
    module = build_module(model)
    x_all, _ = stack_slices(slices)
    outputs = []
    with torch.no_grad():
        for start in range(0, len(slices), batch_size):
            outputs.append(module(x_all[start:start + batch_size])[:, 0].numpy())
    return np.concatenate(outputs, axis=0)


def segment_slice(
    model: ModelParams, x: ScanSlice, config: Optional[PostprocessConfig] = None
) -> SegmentationMask:
    """Reconstruct one slice in evaluation mode and post-process its residual."""
    x_rec = _reconstruct_batch(model, [x], batch_size=1)[0]
    return postprocess(residual(x, x_rec), x.brain_mask, config)


def segment_dataset(
    model: ModelParams,
    slices: List[ScanSlice],
    config: Optional[PostprocessConfig] = None,
    batch_size: int = 32,
) -> List[SegmentationMask]:
    """segment_slice over many slices with batched reconstruction."""
    if not slices:
        return []
    reconstructions = _reconstruct_batch(model, slices, batch_size)
    return [
        postprocess(residual(x, x_rec), x.brain_mask, config)
        for x, x_rec in zip(slices, reconstructions)
    ]


def save_segmentations(masks: List[SegmentationMask], out_dir: Union[str, Path]) -> Path:
    """Write 1-bit mask PNGs and a components.csv table; returns the table path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    try:
        for segmentation in masks:
            Image.fromarray(segmentation.mask.astype(bool)).convert("1").save(
                out_dir / f"{segmentation.slice_id}_mask.png"
            )
            for component in segmentation.components:
                rows.append({"slice_id": segmentation.slice_id, **component.to_dict()})
        table = out_dir / "components.csv"
        columns = ["slice_id", "label", "area", "row_min", "col_min", "row_max", "col_max"]
        pd.DataFrame(rows, columns=columns).to_csv(table, index=False)
    except OSError as e:
        logger.error("Error writing segmentations to %s: %s", out_dir, e)
        raise
    logger.info("Saved %d segmentations to %s", len(masks), out_dir)
    return table
