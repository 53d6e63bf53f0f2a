#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Configuration Models

Configuration dataclasses for data generation, architecture, federation,
post-processing, metrics and whole experiments. Every config round-trips
through to_dict()/from_dict() so a single JSON file determines a run.

MIT License
See LICENSE file for full license text.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .models import AppearanceProfile
from ..exceptions import ConfigurationError


STRATEGIES = ("local_only", "centralized", "fedavg", "feddis", "fedvc", "silobn", "fedgn")
FEDERATED_STRATEGIES = ("fedavg", "feddis", "fedvc", "silobn", "fedgn")
LOSS_MODES = ("full", "no_LOL", "no_SCL", "no_LCL")
NORM_KINDS = ("batch", "group")
SITE_ROLES = ("client", "unseen")


@dataclass
class LesionSpec:
    """Parameters for hyper-intense lesion injection."""

    count_range: Tuple[int, int] = (1, 3)
    radius_range_px: Tuple[float, float] = (2.0, 4.0)
    hyperintensity: float = 0.5

    def validate(self) -> None:
        lo, hi = self.count_range
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"Invalid lesion count_range: {self.count_range}")
        r_lo, r_hi = self.radius_range_px
        if r_lo < 1 or r_hi < r_lo:
            raise ConfigurationError(f"Invalid lesion radius_range_px: {self.radius_range_px}")
        if not 0.0 <= self.hyperintensity <= 1.0:
            raise ConfigurationError(f"hyperintensity must lie in [0,1], got {self.hyperintensity}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "count_range": list(self.count_range),
            "radius_range_px": list(self.radius_range_px),
            "hyperintensity": self.hyperintensity,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LesionSpec":
        return cls(
            count_range=tuple(data.get("count_range", (1, 3))),
            radius_range_px=tuple(data.get("radius_range_px", (2.0, 4.0))),
            hyperintensity=float(data.get("hyperintensity", 0.5)),
        )


@dataclass
class SiteSpec:
    """One acquisition site: training client or unseen evaluation-only site."""

    site_id: str
    role: str = "client"
    profile: AppearanceProfile = field(default_factory=AppearanceProfile)
    counts: Dict[str, int] = field(default_factory=lambda: {"train": 32, "val": 8, "test": 16})
    lesions: LesionSpec = field(default_factory=LesionSpec)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "site_id": self.site_id,
            "role": self.role,
            "profile": self.profile.to_dict(),
            "counts": dict(self.counts),
            "lesions": self.lesions.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SiteSpec":
        return cls(
            site_id=data["site_id"],
            role=data.get("role", "client"),
            profile=AppearanceProfile.from_dict(data.get("profile", {})),
            counts={k: int(v) for k, v in data.get("counts", {}).items()},
            lesions=LesionSpec.from_dict(data.get("lesions", {})),
        )


@dataclass
class DataSpec:
    """Data generation settings: image size plus the list of sites."""

    size: Tuple[int, int] = (64, 64)
    sites: List[SiteSpec] = field(default_factory=list)

    def client_sites(self) -> List[SiteSpec]:
        return [s for s in self.sites if s.role == "client"]

    def unseen_sites(self) -> List[SiteSpec]:
        return [s for s in self.sites if s.role == "unseen"]

    def to_dict(self) -> Dict[str, Any]:
        return {"size": list(self.size), "sites": [s.to_dict() for s in self.sites]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DataSpec":
        return cls(
            size=tuple(data.get("size", (64, 64))),
            sites=[SiteSpec.from_dict(s) for s in data.get("sites", [])],
        )


@dataclass
class ArchConfig:
    """Convolutional autoencoder architecture."""

    base_filters: int = 32
    max_filters: int = 128
    bottleneck_channels: int = 128
    dropout: float = 0.2
    norm_kind: str = "batch"
    group_count: int = 8
    input_size: Tuple[int, int] = (128, 128)

    @property
    def bottleneck_size(self) -> Tuple[int, int]:
        return (self.input_size[0] // 16, self.input_size[1] // 16)

    def validate(self) -> None:
        h, w = self.input_size
        if h % 16 or w % 16 or h <= 0 or w <= 0:
            raise ConfigurationError(f"input_size {self.input_size} must be divisible by 16")
        if self.norm_kind not in NORM_KINDS:
            raise ConfigurationError(f"Unknown norm_kind: {self.norm_kind}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0,1), got {self.dropout}")
        if self.base_filters < 1 or self.max_filters < self.base_filters:
            raise ConfigurationError("Filter range must satisfy 1 <= base_filters <= max_filters")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base_filters": self.base_filters,
            "max_filters": self.max_filters,
            "bottleneck_channels": self.bottleneck_channels,
            "dropout": self.dropout,
            "norm_kind": self.norm_kind,
            "group_count": self.group_count,
            "input_size": list(self.input_size),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ArchConfig":
        data = dict(data)
        if "input_size" in data:
            data["input_size"] = tuple(data["input_size"])
        return cls(**data)


@dataclass
class LossWeights:
    """Reconstruction vs latent (alpha) and SCL vs LOL (beta) trade-offs."""

    alpha: float = 0.2
    beta: float = 0.5

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossWeights":
        return cls(**data)


@dataclass
class FederationConfig:
    """Protocol and optimization hyperparameters."""

    rounds: int = 50
    local_epochs: int = 5
    batch_size: int = 8
    lr0: float = 1e-4
    lr_decay: float = 0.97
    strategy: str = "feddis"
    loss_mode: str = "full"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    gamma_range: Tuple[float, float] = (0.5, 2.0)
    fedvc_virtual_size: Optional[int] = None
    seed: int = 0
    max_workers: int = 1
    checkpoint_every: int = 0

    def learning_rate(self, round_index: int) -> float:
        """Learning rate for a communication round (decayed once per round)."""
        return self.lr0 * self.lr_decay ** round_index

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"Unknown strategy: {self.strategy}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigurationError(f"Unknown loss mode: {self.loss_mode}")
        if self.rounds < 0 or self.local_epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("rounds/local_epochs must be >= 0 and batch_size >= 1")
        g_lo, g_hi = self.gamma_range
        if g_lo <= 0 or g_hi < g_lo:
            raise ConfigurationError(f"Invalid gamma_range: {self.gamma_range}")
        for name in ("alpha", "beta"):
            value = getattr(self.loss_weights, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0,1], got {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rounds": self.rounds,
            "local_epochs": self.local_epochs,
            "batch_size": self.batch_size,
            "lr0": self.lr0,
            "lr_decay": self.lr_decay,
            "strategy": self.strategy,
            "loss_mode": self.loss_mode,
            "loss_weights": self.loss_weights.to_dict(),
            "gamma_range": list(self.gamma_range),
            "fedvc_virtual_size": self.fedvc_virtual_size,
            "seed": self.seed,
            "max_workers": self.max_workers,
            "checkpoint_every": self.checkpoint_every,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FederationConfig":
        data = dict(data)
        if "loss_weights" in data:
            data["loss_weights"] = LossWeights.from_dict(data["loss_weights"])
        if "gamma_range" in data:
            data["gamma_range"] = tuple(data["gamma_range"])
        return cls(**data)


@dataclass
class PostprocessConfig:
    """Residual post-processing chain parameters."""

    erosion_radius: int = 1
    median_size: int = 3
    percentile: float = 99.0
    min_area: int = 4
    connectivity: int = 8

    def validate(self) -> None:
        if not 0.0 < self.percentile < 100.0:
            raise ConfigurationError(f"percentile must lie in (0,100), got {self.percentile}")
        if self.min_area < 1:
            raise ConfigurationError(f"min_area must be >= 1, got {self.min_area}")
        if self.connectivity not in (4, 8):
            raise ConfigurationError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.erosion_radius < 0 or self.median_size < 1:
            raise ConfigurationError("erosion_radius must be >= 0 and median_size >= 1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "erosion_radius": self.erosion_radius,
            "median_size": self.median_size,
            "percentile": self.percentile,
            "min_area": self.min_area,
            "connectivity": self.connectivity,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PostprocessConfig":
        return cls(**data)


@dataclass
class MetricsConfig:
    """Evaluation options."""

    pixel_spacing_mm: float = 2.0
    area_buckets_mm2: List[float] = field(default_factory=lambda: [12.0, 36.0, 100.0])
    baseline: Optional[str] = None
    significance: float = 0.05

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pixel_spacing_mm": self.pixel_spacing_mm,
            "area_buckets_mm2": list(self.area_buckets_mm2),
            "baseline": self.baseline,
            "significance": self.significance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricsConfig":
        return cls(**data)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    name: str = "feddis-desk"
    seed: int = 0
    output_dir: str = "runs/feddis-desk"
    data: DataSpec = field(default_factory=DataSpec)
    arch: ArchConfig = field(default_factory=ArchConfig)
    federation: FederationConfig = field(default_factory=FederationConfig)
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the run-determining sections."""
        payload = self.to_dict()
        payload.pop("output_dir")
        return _hash_payload(payload)

    def data_hash(self) -> str:
        """SHA-256 of the data section and global seed only."""
        return _hash_payload({"seed": self.seed, "data": self.data.to_dict()})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "data": self.data.to_dict(),
            "arch": self.arch.to_dict(),
            "federation": self.federation.to_dict(),
            "postprocess": self.postprocess.to_dict(),
            "metrics": self.metrics.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        return cls(
            name=data.get("name", "feddis-desk"),
            seed=int(data.get("seed", 0)),
            output_dir=data.get("output_dir", "runs/feddis-desk"),
            data=DataSpec.from_dict(data.get("data", {})),
            arch=ArchConfig.from_dict(data.get("arch", {})),
            federation=FederationConfig.from_dict(data.get("federation", {})),
            postprocess=PostprocessConfig.from_dict(data.get("postprocess", {})),
            metrics=MetricsConfig.from_dict(data.get("metrics", {})),
        )

    def save(self, path: Path) -> None:
        """Write the config snapshot as JSON."""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


def _hash_payload(payload: Dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
