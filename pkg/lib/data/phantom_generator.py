#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Phantom Generator

Generates synthetic multi-site brain-like slices: a shared anatomy family
(elliptical boundary rim, soft internal sub-structures) passed through a
site-specific appearance profile, plus hyper-intense lesion injection for
test sets.

MIT License
See LICENSE file for full license text.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..exceptions import ConfigurationError, GenerationError
from ..models import AppearanceProfile, ClientDataset, ScanSlice
from ..models.config import DataSpec, LesionSpec
from ..utils.seeding import derive_seed

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

# Anatomy intensities before the appearance profile
TISSUE_LEVEL = 0.55
RIM_LEVEL = 0.82
RIM_WIDTH = 0.12  # in normalized ellipse radius
TEXTURE_AMPLITUDE = 0.03


def _validate_size(size: Tuple[int, int]) -> None:
    h, w = size
    if h <= 0 or w <= 0 or h % 16 or w % 16:
        raise ConfigurationError(f"Slice size {size} must be positive and divisible by 16")


def _rotated_radius(
    yy: np.ndarray, xx: np.ndarray, center: Tuple[float, float], axes: Tuple[float, float], theta: float
) -> np.ndarray:
    """Normalized elliptical radius (1.0 on the ellipse boundary)."""
    dy = yy - center[0]
    dx = xx - center[1]
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return np.sqrt((u / axes[1]) ** 2 + (v / axes[0]) ** 2)


def _draw_anatomy(rng: np.random.Generator, size: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Draw one healthy anatomy from the shared shape family.

    Returns:
        (pixels in [0,1], brain_mask)
    """
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    center = (h / 2.0 + rng.uniform(-0.03, 0.03) * h, w / 2.0 + rng.uniform(-0.03, 0.03) * w)
    axes = (rng.uniform(0.36, 0.42) * h, rng.uniform(0.30, 0.36) * w)
    theta = rng.uniform(-0.15, 0.15)
    radius = _rotated_radius(yy, xx, center, axes, theta)
    brain_mask = radius <= 1.0

    pixels = np.full(size, TISSUE_LEVEL)
    pixels[radius > 1.0 - RIM_WIDTH] = RIM_LEVEL

    n_structures = int(rng.integers(3, 7))
    for _ in range(n_structures):
        # Place sub-structures well inside the boundary rim
        angle = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(0.0, 0.55)
        s_center = (
            center[0] + dist * axes[0] * np.sin(angle),
            center[1] + dist * axes[1] * np.cos(angle),
        )
        s_axes = (rng.uniform(0.06, 0.16) * h, rng.uniform(0.06, 0.16) * w)
        s_theta = rng.uniform(0, np.pi)
        level = rng.uniform(0.15, 0.35) if rng.random() < 0.5 else rng.uniform(0.65, 0.78)
        s_radius = _rotated_radius(yy, xx, s_center, s_axes, s_theta)
        weight = 1.0 / (1.0 + np.exp((s_radius - 1.0) * 8.0))
        pixels = pixels * (1.0 - weight) + level * weight

    texture = ndimage.gaussian_filter(rng.standard_normal(size), sigma=2.0)
    texture /= max(np.abs(texture).max(), 1e-12)
    pixels = np.clip(pixels + TEXTURE_AMPLITUDE * texture, 0.0, 1.0)
    return np.where(brain_mask, pixels, 0.0), brain_mask


def generate_phantom_client(
    seed: int,
    profile: AppearanceProfile,
    counts: Dict[str, int],
    size: Tuple[int, int] = (64, 64),
    client_id: str = "client",
) -> ClientDataset:
    """Generate one site's healthy dataset.

    The anatomy stream depends only on the seed, so two sites sharing a seed
    differ only through their appearance profiles.

    Args:
        seed: Generation seed
        profile: Site appearance profile
        counts: Slice counts per split (train/val/test)
        size: (H, W), each divisible by 16
        client_id: Prefix for slice identifiers

    Returns:
        ClientDataset with healthy slices (no lesion masks)
    """
    _validate_size(size)
    missing = [s for s in SPLITS if s not in counts]
    if missing:
        raise ConfigurationError(f"counts missing splits: {missing}")
    if any(counts[s] < 0 for s in SPLITS) or sum(counts[s] for s in SPLITS) == 0:
        raise ConfigurationError(f"counts must be non-negative with at least one slice: {counts}")

    anatomy_rng = np.random.default_rng([seed, 0])
    noise_rng = np.random.default_rng([seed, 1])

    splits: Dict[str, List[ScanSlice]] = {}
    for split in SPLITS:
        slices = []
        for i in range(counts[split]):
            pixels, brain_mask = _draw_anatomy(anatomy_rng, size)
            if not profile.is_identity:
                pixels = profile.apply(pixels, brain_mask, noise_rng)
            slices.append(
                ScanSlice(
                    slice_id=f"{client_id}-{split}-{i:04d}",
                    pixels=pixels,
                    brain_mask=brain_mask,
                )
            )
        splits[split] = slices

    logger.debug(
        "Generated %s: %d/%d/%d slices at %dx%d",
        client_id, counts["train"], counts["val"], counts["test"], size[0], size[1],
    )
    return ClientDataset(
        client_id=client_id,
        train=splits["train"],
        val=splits["val"],
        test=splits["test"],
        profile=profile,
        seed=seed,
    )


def _lesion_blob(
    rng: np.random.Generator, brain_mask: np.ndarray, depth: np.ndarray, radius: float
) -> np.ndarray:
    candidates = np.argwhere(depth > radius + 1.0)
    if len(candidates) == 0:
        raise GenerationError(f"Lesion radius {radius:.1f}px does not fit inside the brain mask")
    cy, cx = candidates[rng.integers(len(candidates))]
    axes = (radius * rng.uniform(0.7, 1.3), radius * rng.uniform(0.7, 1.3))
    yy, xx = np.mgrid[0:brain_mask.shape[0], 0:brain_mask.shape[1]].astype(np.float64)
    blob = _rotated_radius(yy, xx, (float(cy), float(cx)), axes, rng.uniform(0, np.pi)) <= 1.0
    # Guarantee at least the center pixel for very thin ellipses
    blob[cy, cx] = True
    return blob & brain_mask


def inject_lesions(dataset: ClientDataset, seed: int, lesion_spec: LesionSpec) -> ClientDataset:
    """Inject hyper-intense lesions into the test split.

    Lesion pixels are raised toward 1.0: p + h * (1 - p). Train and val slices
    are returned as untouched copies.

    Args:
        dataset: Healthy dataset
        seed: Lesion placement seed
        lesion_spec: Count, radius and hyperintensity parameters

    Returns:
        New ClientDataset whose test slices carry non-empty lesion masks
    """
    lesion_spec.validate()
    rng = np.random.default_rng(seed)
    count_lo, count_hi = lesion_spec.count_range
    r_lo, r_hi = lesion_spec.radius_range_px
    h = lesion_spec.hyperintensity

    test = []
    for scan in dataset.test:
        depth = ndimage.distance_transform_edt(scan.brain_mask)
        if r_hi + 1.0 >= depth.max():
            raise GenerationError(
                f"Lesion radius {r_hi}px larger than brain extent of {scan.slice_id}"
            )
        lesion_mask = np.zeros_like(scan.brain_mask, dtype=bool)
        for _ in range(int(rng.integers(count_lo, count_hi + 1))):
            lesion_mask |= _lesion_blob(rng, scan.brain_mask, depth, rng.uniform(r_lo, r_hi))
        pixels = scan.pixels.copy()
        pixels[lesion_mask] = pixels[lesion_mask] + h * (1.0 - pixels[lesion_mask])
        test.append(
            ScanSlice(
                slice_id=scan.slice_id,
                pixels=pixels,
                brain_mask=scan.brain_mask.copy(),
                lesion_mask=lesion_mask,
            )
        )

    return ClientDataset(
        client_id=dataset.client_id,
        train=[s.with_pixels(s.pixels.copy()) for s in dataset.train],
        val=[s.with_pixels(s.pixels.copy()) for s in dataset.val],
        test=test,
        profile=dataset.profile,
        seed=dataset.seed,
    )


def normalize(scan: ScanSlice) -> ScanSlice:
    """Min-max scale in-mask pixels to [0,1]; out-of-mask pixels become 0.

    A constant in-mask image maps to all zeros.
    """
    pixels = scan.pixels.astype(np.float64)
    mask = scan.brain_mask.astype(bool)
    out = np.zeros_like(pixels)
    if mask.any():
        values = pixels[mask]
        lo, hi = values.min(), values.max()
        if hi > lo:
            out[mask] = (values - lo) / (hi - lo)
    return scan.with_pixels(out)


def build_site_datasets(
    data_spec: DataSpec, global_seed: int
) -> Dict[str, Tuple[ClientDataset, ClientDataset]]:
    """Generate (healthy, lesioned) datasets for every configured site.

    Seeds are derived per site so adding a site leaves the others unchanged.
    """
    datasets: Dict[str, Tuple[ClientDataset, ClientDataset]] = {}
    for site in data_spec.sites:
        healthy = generate_phantom_client(
            seed=derive_seed(global_seed, "data", site.site_id),
            profile=site.profile,
            counts=site.counts,
            size=tuple(data_spec.size),
            client_id=site.site_id,
        )
        lesioned = inject_lesions(
            healthy, derive_seed(global_seed, "lesions", site.site_id), site.lesions
        )
        datasets[site.site_id] = (healthy, lesioned)
        logger.info(
            "Site %s (%s): %d train / %d val / %d test slices",
            site.site_id, site.role, healthy.n_train, len(healthy.val), len(healthy.test),
        )
    return datasets

