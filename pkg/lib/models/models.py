#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Data Models

Core data structures for scan slices, client datasets, segmentations,
training records and run manifests. Defines the domain models used
throughout the generator, trainer and evaluator.

MIT License
See LICENSE file for full license text.
"""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Dict, Any, List, Tuple

import numpy as np
from scipy import ndimage


@dataclass
class AppearanceProfile:
    """Site-specific intensity characteristics applied on top of shared anatomy."""

    brightness_offset: float = 0.0
    contrast_gain: float = 1.0
    gamma: float = 1.0
    noise_sigma: float = 0.0
    smoothing_radius: float = 0.0

    @property
    def is_identity(self) -> bool:
        return (
            self.brightness_offset == 0.0
            and self.contrast_gain == 1.0
            and self.gamma == 1.0
            and self.noise_sigma == 0.0
            and self.smoothing_radius == 0.0
        )

    def apply(
        self,
        pixels: np.ndarray,
        brain_mask: np.ndarray,
        rng: Optional[np.random.Generator] = None,
    ) -> np.ndarray:
        """Apply the profile: smoothing, contrast/brightness, gamma, noise, clip.

        Args:
            pixels: H×W image in [0,1]
            brain_mask: H×W binary mask; pixels outside are set to 0
            rng: Generator for the additive noise (required when noise_sigma > 0)

        Returns:
            Transformed image in [0,1]
        """
        out = pixels.astype(np.float64, copy=True)
        if self.smoothing_radius > 0:
            out = ndimage.gaussian_filter(out, sigma=self.smoothing_radius, mode="nearest")
        out = out * self.contrast_gain + self.brightness_offset
        out = np.clip(out, 0.0, 1.0)
        if self.gamma != 1.0:
            out = np.power(out, self.gamma)
        if self.noise_sigma > 0:
            if rng is None:
                raise ValueError("A random generator is required when noise_sigma > 0")
            out = out + rng.normal(0.0, self.noise_sigma, size=out.shape)
        out = np.clip(out, 0.0, 1.0)
        return np.where(brain_mask, out, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "brightness_offset": self.brightness_offset,
            "contrast_gain": self.contrast_gain,
            "gamma": self.gamma,
            "noise_sigma": self.noise_sigma,
            "smoothing_radius": self.smoothing_radius,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AppearanceProfile":
        """Create from dictionary."""
        return cls(**data)


@dataclass
class ScanSlice:
    """A single 2D grayscale slice with brain mask and optional lesion ground truth."""

    slice_id: str
    pixels: np.ndarray
    brain_mask: np.ndarray
    lesion_mask: Optional[np.ndarray] = None

    @property
    def size(self) -> Tuple[int, int]:
        return tuple(self.pixels.shape)

    @property
    def has_lesion(self) -> bool:
        return self.lesion_mask is not None

    def with_pixels(self, pixels: np.ndarray) -> "ScanSlice":
        """Return a copy carrying new pixel values and the same masks."""
        return ScanSlice(
            slice_id=self.slice_id,
            pixels=pixels,
            brain_mask=self.brain_mask.copy(),
            lesion_mask=None if self.lesion_mask is None else self.lesion_mask.copy(),
        )


@dataclass
class ClientDataset:
    """One client's (site's) train/val/test slices and appearance profile."""

    client_id: str
    train: List[ScanSlice]
    val: List[ScanSlice]
    test: List[ScanSlice]
    profile: AppearanceProfile = field(default_factory=AppearanceProfile)
    seed: int = 0

    @property
    def n_train(self) -> int:
        """Sample count N_j used for aggregation weights."""
        return len(self.train)

    def splits(self) -> Dict[str, List[ScanSlice]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def slice_ids(self) -> List[str]:
        return [s.slice_id for split in self.splits().values() for s in split]


@dataclass
class Component:
    """Connected component of a binary segmentation."""

    label: int
    area: int
    bbox: Tuple[int, int, int, int]  # row_min, col_min, row_max (excl), col_max (excl)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for CSV export."""
        return {
            "label": self.label,
            "area": self.area,
            "row_min": self.bbox[0],
            "col_min": self.bbox[1],
            "row_max": self.bbox[2],
            "col_max": self.bbox[3],
        }


@dataclass
class ResidualMap:
    """Signed residual x - x_Rec for one slice."""

    values: np.ndarray
    slice_id: str = ""


@dataclass
class SegmentationMask:
    """Binary anomaly segmentation and its surviving components."""

    mask: np.ndarray
    components: List[Component] = field(default_factory=list)
    slice_id: str = ""
    status: str = "ok"

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class RoundRecord:
    """Summary of one completed communication round."""

    round_index: int
    client_losses: Dict[str, Dict[str, float]]
    val_rec_loss: float
    wall_clock: float
    checksum: str

    def mean_client_loss(self) -> float:
        totals = [terms.get("total", 0.0) for terms in self.client_losses.values()]
        return float(np.mean(totals)) if totals else 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for CSV/JSON serialization."""
        return {
            "round": self.round_index,
            "mean_client_loss": self.mean_client_loss(),
            "val_rec_loss": self.val_rec_loss,
            "wall_clock": self.wall_clock,
            "checksum": self.checksum,
        }


@dataclass
class EmbeddingRecord:
    """One flattened bottleneck embedding of one slice."""

    client_id: str
    slice_id: str
    kind: str  # shape, appearance or shape_gamma
    vector: np.ndarray


@dataclass
class RunManifest:
    """Tracks stage completion and artifacts for one experiment run."""

    config_hash: str
    data_hash: str
    code_version: str
    artifacts: Dict[str, List[str]] = field(default_factory=dict)
    stages: Dict[str, str] = field(default_factory=dict)
    created: Optional[datetime] = field(default_factory=datetime.now)

    def is_complete(self, stage: str) -> bool:
        return self.stages.get(stage) == "complete"

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "config_hash": self.config_hash,
            "data_hash": self.data_hash,
            "code_version": self.code_version,
            "artifacts": self.artifacts,
            "stages": self.stages,
            "created": self.created.isoformat() if self.created else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        """Create from dictionary."""
        data = dict(data)
        if data.get("created"):
            data["created"] = datetime.fromisoformat(data["created"])
        return cls(**data)
