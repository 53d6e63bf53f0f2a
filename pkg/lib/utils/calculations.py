#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Calculations

Evaluation metrics: DICE, SSIM, relative improvement, two-sample KS test,
cosine similarities between latent embeddings (SAS/SCS) and DICE stratified
by lesion size.

MIT License
See LICENSE file for full license text.
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from skimage.metrics import structural_similarity

from ..exceptions import ConfigurationError, InputError, ShapeError, UndefinedBaselineError
from ..models import EmbeddingRecord, SegmentationMask

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

MaskLike = Union[SegmentationMask, np.ndarray]


def _as_mask(mask: MaskLike) -> np.ndarray:
    if isinstance(mask, SegmentationMask):
        mask = mask.mask
    return np.asarray(mask, dtype=bool)


def bucket_labels(buckets: Sequence[float]) -> List[str]:
    """Readable labels for the half-open area intervals defined by buckets."""
    edges = [float(b) for b in buckets]
    labels = [f"<{edges[0]:g}"]
    labels += [f"{lo:g}-{hi:g}" for lo, hi in zip(edges[:-1], edges[1:])]
    labels.append(f">={edges[-1]:g}")
    return labels


class EvaluationMetrics:
    """Metric calculations shared by the evaluation analyzers."""

    @staticmethod
    def dice(pred: MaskLike, gt: MaskLike) -> float:
        """2|P∩G| / (|P|+|G|); two empty masks agree perfectly (1.0)."""
        p, g = _as_mask(pred), _as_mask(gt)
        if p.shape != g.shape:
            raise ShapeError(f"DICE operands differ: {p.shape} vs {g.shape}")
        denominator = int(p.sum()) + int(g.sum())
        if denominator == 0:
            return 1.0
        return 2.0 * int(np.logical_and(p, g).sum()) / denominator

    @staticmethod
    def ssim(x: np.ndarray, y: np.ndarray) -> float:
        """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) on [0,1] images."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape:
            raise ShapeError(f"SSIM operands differ: {x.shape} vs {y.shape}")
        if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
            raise ConfigurationError(f"SSIM needs 2-D images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
        return float(structural_similarity(
            x, y,
            data_range=1.0,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        ))

    @staticmethod
    def relative_improvement(a: float, b: float) -> float:
        """(a - b) / b."""
        if b == 0:
            raise UndefinedBaselineError("Relative improvement is undefined for a zero baseline")
        return (a - b) / b

    @staticmethod
    def ks_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> Tuple[float, float]:
        """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
        a = np.asarray(list(sample_a), dtype=np.float64)
        b = np.asarray(list(sample_b), dtype=np.float64)
        if a.size == 0 or b.size == 0:
            raise InputError("KS test needs two non-empty samples")
        result = stats.ks_2samp(a, b, method="asymp")
        return float(result.statistic), float(result.pvalue)

    @staticmethod
    def cosine_similarity(u: np.ndarray, v: np.ndarray) -> Optional[float]:
        """Cosine of the angle between u and v; None if either has zero norm."""
        u = np.ravel(np.asarray(u, dtype=np.float64))
        v = np.ravel(np.asarray(v, dtype=np.float64))
        if u.shape != v.shape:
            raise ShapeError(f"Cosine operands differ: {u.shape} vs {v.shape}")
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            return None
        return float(np.dot(u, v) / (nu * nv))


def shape_appearance_similarity(records: Iterable[EmbeddingRecord]) -> Tuple[float, float]:
    """Mean cosine similarity of (z_S, z_A) and of (z_S, z_gS) per slice.

    Returns:
        (SAS, SCS); a score with no valid pairs is NaN
    """
    by_slice: Dict[Tuple[str, str], Dict[str, np.ndarray]] = defaultdict(dict)
    for record in records:
        by_slice[(record.client_id, record.slice_id)][record.kind] = record.vector

    sas: List[float] = []
    scs: List[float] = []
    excluded = 0
    for vectors in by_slice.values():
        z_s = vectors.get("shape")
        if z_s is None:
            continue
        for kind, scores in (("appearance", sas), ("shape_gamma", scs)):
            if kind not in vectors:
                continue
            value = EvaluationMetrics.cosine_similarity(z_s, vectors[kind])
            if value is None:
                excluded += 1
            else:
                scores.append(value)
    if excluded:
        logger.warning("Excluded %d zero-norm embedding pairs from SAS/SCS", excluded)
    return (
        float(np.mean(sas)) if sas else float("nan"),
        float(np.mean(scs)) if scs else float("nan"),
    )


def stratify_scores(
    dice_values: Sequence[float], areas_mm2: Sequence[float], buckets: Sequence[float]
) -> pd.DataFrame:
    """Mean/std DICE per lesion-area bucket; empty buckets are absent.

    Slices without a lesion (area 0) are not stratified.
    """
    frame = pd.DataFrame({"dice": list(dice_values), "lesion_area_mm2": list(areas_mm2)})
    frame = frame[frame["lesion_area_mm2"] > 0]
    edges = [0.0] + [float(b) for b in buckets] + [np.inf]
    labels = bucket_labels(buckets)
    frame["bucket"] = pd.cut(frame["lesion_area_mm2"], bins=edges, labels=labels, right=False)

    grouped = frame.groupby("bucket", observed=True)["dice"]
    table = grouped.agg(["mean", "std", "count"]).reset_index()
    table["std"] = table["std"].fillna(0.0)
    table["bucket"] = table["bucket"].astype(str)
    empty = [label for label in labels if label not in set(table["bucket"])]
    if empty:
        logger.warning("Lesion-area buckets without slices: %s", ", ".join(empty))
    return table


def stratified_dice(
    results: Sequence[Tuple[MaskLike, MaskLike]],
    buckets: Sequence[float],
    pixel_spacing_mm: float = 2.0,
) -> pd.DataFrame:
    """DICE grouped by ground-truth lesion area per slice (mm²)."""
    pixel_area = pixel_spacing_mm ** 2
    dice_values = [EvaluationMetrics.dice(pred, gt) for pred, gt in results]
    areas = [float(_as_mask(gt).sum()) * pixel_area for _, gt in results]
    return stratify_scores(dice_values, areas, buckets)


dice = EvaluationMetrics.dice
ssim = EvaluationMetrics.ssim
relative_improvement = EvaluationMetrics.relative_improvement
ks_test = EvaluationMetrics.ks_test
cosine_similarity = EvaluationMetrics.cosine_similarity
