#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Config Validator

Validates an experiment config file layout before any stage runs and
reports every problem found, not just the first. Values are type-checked
before they are range-checked and keys the config dataclasses do not
know are rejected, so a malformed file always surfaces as a
ConfigurationError.
"""

import logging
from dataclasses import fields
from typing import Any, Dict, List, Optional

from ..exceptions import ConfigurationError
from ..models.config import (
    LOSS_MODES,
    NORM_KINDS,
    SITE_ROLES,
    STRATEGIES,
    ArchConfig,
    DataSpec,
    ExperimentConfig,
    FederationConfig,
    LesionSpec,
    LossWeights,
    MetricsConfig,
    PostprocessConfig,
    SiteSpec,
)
from ..models.models import AppearanceProfile

logger = logging.getLogger(__name__)

REQUIRED_SECTIONS = ("data", "arch", "federation")
SPLITS = ("train", "val", "test")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _field_names(cls) -> List[str]:
    return [f.name for f in fields(cls)]


class ConfigValidator:
    """Validates experiment configuration dictionaries."""

    def __init__(self, raw: Dict[str, Any]):
        self.raw = raw
        self.errors: List[str] = []
        self.validation_results: Dict[str, bool] = {}

    def validate_all(self) -> Dict[str, bool]:
        """Run every check; results map check name to pass/fail."""
        self.errors = []
        results = {"sections_valid": self.validate_sections()}
        if results["sections_valid"]:
            results["data_valid"] = self.validate_data()
            results["arch_valid"] = self.validate_arch()
            results["federation_valid"] = self.validate_federation()
            results["postprocess_valid"] = self.validate_postprocess()
            results["metrics_valid"] = self.validate_metrics()
        self.validation_results = results
        return results

    def _fail(self, message: str) -> bool:
        self.errors.append(message)
        return False

    def _known_keys(self, where: str, section: Any, cls) -> bool:
        """The section is an object whose keys are all fields of cls."""
        if not isinstance(section, dict):
            return self._fail(f"{where} must be an object")
        unknown = sorted(set(section) - set(_field_names(cls)))
        if unknown:
            return self._fail(f"{where}: unknown keys {unknown}")
        return True

    def _numeric(self, name: str, value: Any, integer: bool = False) -> bool:
        valid = _is_int(value) if integer else _is_number(value)
        if not valid:
            kind = "an integer" if integer else "a number"
            self._fail(f"{name} must be {kind}, got {value!r}")
        return valid

    def _pair(self, name: str, value: Any, integer: bool = False) -> Optional[List[float]]:
        """Two numbers as a list, or None after recording the problem."""
        check = _is_int if integer else _is_number
        if isinstance(value, (list, tuple)) and len(value) == 2 and all(check(v) for v in value):
            return list(value)
        kind = "integers" if integer else "numbers"
        self._fail(f"{name} must be a pair of {kind}, got {value!r}")
        return None

    def _string(self, name: str, value: Any, allow_none: bool = False) -> bool:
        if isinstance(value, str) or (allow_none and value is None):
            return True
        return self._fail(f"{name} must be a string, got {value!r}")

    def validate_sections(self) -> bool:
        if not isinstance(self.raw, dict):
            return self._fail("Config must be a JSON object")
        ok = self._known_keys("config", self.raw, ExperimentConfig)
        for section in REQUIRED_SECTIONS:
            if not isinstance(self.raw.get(section), dict):
                ok = self._fail(f"Missing or invalid section: {section}")
        for section in ("postprocess", "metrics"):
            if section in self.raw and not isinstance(self.raw[section], dict):
                ok = self._fail(f"Invalid section: {section}")
        if "seed" in self.raw and not _is_int(self.raw["seed"]):
            ok = self._fail("seed must be an integer")
        for key in ("name", "output_dir"):
            if key in self.raw and not self._string(key, self.raw[key]):
                ok = False
        return ok

    def validate_data(self) -> bool:
        data = self.raw["data"]
        if not self._known_keys("data", data, DataSpec):
            return False
        ok = True
        size = data.get("size", [64, 64])
        if not (isinstance(size, list) and len(size) == 2 and all(_is_int(v) and v > 0 for v in size)):
            return self._fail(f"data.size must be two positive integers, got {size}")
        if size[0] % 16 or size[1] % 16:
            ok = self._fail(f"data.size {size} must be divisible by 16")

        sites = data.get("sites", [])
        if not isinstance(sites, list) or not sites:
            return self._fail("data.sites must list at least one site")
        if not all(isinstance(site, dict) for site in sites):
            return self._fail("data.sites entries must be objects")
        ids = [s.get("site_id") for s in sites]
        if not all(isinstance(i, str) for i in ids) or len(set(ids)) != len(ids):
            ok = self._fail(f"Site ids must be present, strings and unique: {ids}")

        clients = 0
        for site in sites:
            name = site.get("site_id", "?")
            if not self._known_keys(f"Site {name}", site, SiteSpec):
                ok = False
                continue
            role = site.get("role", "client")
            if not isinstance(role, str) or role not in SITE_ROLES:
                ok = self._fail(f"Site {name}: unknown role {role!r}")
            if role == "client":
                clients += 1
            ok = self._validate_counts(name, site.get("counts", {"train": 32, "val": 8, "test": 16}), role) and ok
            ok = self._validate_profile(name, site.get("profile", {})) and ok
            ok = self._validate_lesions(name, site.get("lesions", {})) and ok
        if clients == 0:
            ok = self._fail("At least one site must have role 'client'")
        return ok

    def _validate_counts(self, name: str, counts: Any, role: str) -> bool:
        if not isinstance(counts, dict):
            return self._fail(f"Site {name}: counts must be an object")
        unknown = sorted(set(counts) - set(SPLITS))
        if unknown:
            return self._fail(f"Site {name}: unknown count splits {unknown}")
        if any(not _is_int(v) or v < 0 for v in counts.values()):
            return self._fail(f"Site {name}: counts must be non-negative integers")
        ok = True
        if counts.get("test", 0) < 1:
            ok = self._fail(f"Site {name}: needs at least one test slice")
        if role == "client" and counts.get("train", 0) < 1:
            ok = self._fail(f"Client site {name}: needs at least one training slice")
        return ok

    def _validate_profile(self, name: str, profile: Any) -> bool:
        if not self._known_keys(f"Site {name} profile", profile, AppearanceProfile):
            return False
        ok = True
        for key, value in profile.items():
            if not self._numeric(f"Site {name} profile.{key}", value):
                ok = False
        if not ok:
            return False
        if profile.get("gamma", 1.0) <= 0:
            ok = self._fail(f"Site {name}: profile gamma must be positive")
        if profile.get("noise_sigma", 0.0) < 0 or profile.get("smoothing_radius", 0.0) < 0:
            ok = self._fail(f"Site {name}: noise_sigma and smoothing_radius must be >= 0")
        return ok

    def _validate_lesions(self, name: str, lesions: Any) -> bool:
        if not self._known_keys(f"Site {name} lesions", lesions, LesionSpec):
            return False
        ok = True
        if "count_range" in lesions:
            counts = self._pair(f"Site {name} lesions.count_range", lesions["count_range"], integer=True)
            if counts is None:
                ok = False
            elif counts[0] < 1 or counts[1] < counts[0]:
                ok = self._fail(f"Site {name}: lesion count_range must satisfy 1 <= min <= max")
        if "radius_range_px" in lesions:
            radii = self._pair(f"Site {name} lesions.radius_range_px", lesions["radius_range_px"])
            if radii is None:
                ok = False
            elif radii[0] < 1 or radii[1] < radii[0]:
                ok = self._fail(f"Site {name}: lesion radius_range_px must satisfy 1 <= min <= max")
        if "hyperintensity" in lesions:
            value = lesions["hyperintensity"]
            if not self._numeric(f"Site {name} lesions.hyperintensity", value):
                ok = False
            elif not 0.0 <= value <= 1.0:
                ok = self._fail(f"Site {name}: lesion hyperintensity must lie in [0,1]")
        return ok

    def validate_arch(self) -> bool:
        arch = self.raw["arch"]
        if not self._known_keys("arch", arch, ArchConfig):
            return False
        ok = True
        norm_kind = arch.get("norm_kind", "batch")
        if not isinstance(norm_kind, str) or norm_kind not in NORM_KINDS:
            ok = self._fail(f"arch.norm_kind must be one of {NORM_KINDS}")
        for key, default in (("base_filters", 32), ("max_filters", 128), ("group_count", 8)):
            value = arch.get(key, default)
            if not self._numeric(f"arch.{key}", value, integer=True):
                ok = False
            elif value < 1:
                ok = self._fail(f"arch.{key} must be positive")
        bottleneck = arch.get("bottleneck_channels", 128)
        if not self._numeric("arch.bottleneck_channels", bottleneck, integer=True):
            ok = False
        elif bottleneck < 2 or bottleneck % 2:
            ok = self._fail("arch.bottleneck_channels must be even")
        dropout = arch.get("dropout", 0.2)
        if not self._numeric("arch.dropout", dropout):
            ok = False
        elif not 0.0 <= dropout < 1.0:
            ok = self._fail("arch.dropout must lie in [0,1)")
        if "input_size" in arch:
            size = self.raw["data"].get("size", [64, 64])
            input_size = self._pair("arch.input_size", arch["input_size"], integer=True)
            if input_size is None:
                ok = False
            elif input_size != list(size):
                ok = self._fail(f"arch.input_size {arch['input_size']} must equal data.size {size}")
        return ok

    def validate_federation(self) -> bool:
        fed = self.raw["federation"]
        if not self._known_keys("federation", fed, FederationConfig):
            return False
        ok = True
        strategy = fed.get("strategy", "feddis")
        if not isinstance(strategy, str) or strategy not in STRATEGIES:
            ok = self._fail(f"federation.strategy must be one of {STRATEGIES}")
        loss_mode = fed.get("loss_mode", "full")
        if not isinstance(loss_mode, str) or loss_mode not in LOSS_MODES:
            ok = self._fail(f"federation.loss_mode must be one of {LOSS_MODES}")
        for key, minimum in (("rounds", 0), ("local_epochs", 0), ("batch_size", 1),
                             ("max_workers", 1), ("checkpoint_every", 0), ("seed", 0)):
            if key not in fed:
                continue
            if not self._numeric(f"federation.{key}", fed[key], integer=True):
                ok = False
            elif fed[key] < minimum:
                ok = self._fail(f"federation.{key} must be >= {minimum}")
        lr0, lr_decay = fed.get("lr0", 1e-4), fed.get("lr_decay", 0.97)
        if self._numeric("federation.lr0", lr0) and self._numeric("federation.lr_decay", lr_decay):
            if lr0 <= 0 or not 0 < lr_decay <= 1:
                ok = self._fail("federation.lr0 must be positive and lr_decay in (0,1]")
        else:
            ok = False
        if "gamma_range" in fed:
            gammas = self._pair("federation.gamma_range", fed["gamma_range"])
            if gammas is None:
                ok = False
            elif gammas[0] <= 0 or gammas[1] < gammas[0]:
                ok = self._fail("federation.gamma_range must satisfy 0 < low <= high")
        virtual = fed.get("fedvc_virtual_size")
        if virtual is not None:
            if not self._numeric("federation.fedvc_virtual_size", virtual, integer=True):
                ok = False
            elif virtual < 1:
                ok = self._fail("federation.fedvc_virtual_size must be positive")
        if "loss_weights" in fed:
            ok = self._validate_loss_weights(fed["loss_weights"]) and ok
        return ok

    def _validate_loss_weights(self, weights: Any) -> bool:
        if not self._known_keys("federation.loss_weights", weights, LossWeights):
            return False
        ok = True
        for key, value in weights.items():
            if not self._numeric(f"federation.loss_weights.{key}", value):
                ok = False
            elif not 0.0 <= value <= 1.0:
                ok = self._fail(f"federation.loss_weights.{key} must lie in [0,1]")
        return ok

    def validate_postprocess(self) -> bool:
        post = self.raw.get("postprocess", {})
        if not self._known_keys("postprocess", post, PostprocessConfig):
            return False
        ok = True
        percentile = post.get("percentile", 99.0)
        if not self._numeric("postprocess.percentile", percentile):
            ok = False
        elif not 0 < percentile < 100:
            ok = self._fail("postprocess.percentile must lie in (0,100)")
        for key, default, minimum in (("min_area", 4, 1), ("median_size", 3, 1), ("erosion_radius", 1, 0)):
            value = post.get(key, default)
            if not self._numeric(f"postprocess.{key}", value, integer=True):
                ok = False
            elif value < minimum:
                ok = self._fail(f"postprocess.{key} must be >= {minimum}")
        connectivity = post.get("connectivity", 8)
        if not _is_int(connectivity) or connectivity not in (4, 8):
            ok = self._fail("postprocess.connectivity must be 4 or 8")
        return ok

    def validate_metrics(self) -> bool:
        metrics = self.raw.get("metrics", {})
        if not self._known_keys("metrics", metrics, MetricsConfig):
            return False
        ok = True
        buckets = metrics.get("area_buckets_mm2", [12.0, 36.0, 100.0])
        if (
            not isinstance(buckets, list)
            or not buckets
            or not all(_is_number(b) for b in buckets)
            or any(b <= 0 for b in buckets)
            or buckets != sorted(set(buckets))
        ):
            ok = self._fail("metrics.area_buckets_mm2 must be strictly increasing positive values")
        spacing = metrics.get("pixel_spacing_mm", 2.0)
        if not self._numeric("metrics.pixel_spacing_mm", spacing):
            ok = False
        elif spacing <= 0:
            ok = self._fail("metrics.pixel_spacing_mm must be positive")
        significance = metrics.get("significance", 0.05)
        if not self._numeric("metrics.significance", significance):
            ok = False
        elif not 0 < significance < 1:
            ok = self._fail("metrics.significance must lie in (0,1)")
        if not self._string("metrics.baseline", metrics.get("baseline"), allow_none=True):
            ok = False
        return ok

    def get_validation_summary(self) -> Dict[str, Any]:
        """Summary of the last validation run."""
        if not self.validation_results:
            return {"status": "No validation run"}
        all_passed = all(self.validation_results.values())
        return {
            "overall_status": "PASSED" if all_passed else "FAILED",
            "details": self.validation_results,
            "errors": list(self.errors),
            "total_checks": len(self.validation_results),
            "passed_checks": sum(1 for v in self.validation_results.values() if v),
            "failed_checks": sum(1 for v in self.validation_results.values() if not v),
        }


def load_validated_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw config dict and build the ExperimentConfig.

    Raises:
        ConfigurationError: listing every problem found
    """
    validator = ConfigValidator(raw)
    validator.validate_all()
    if validator.errors:
        for error in validator.errors:
            logger.error(f"Config error: {error}")
        raise ConfigurationError("Invalid configuration:\n  - " + "\n  - ".join(validator.errors))
    config = ExperimentConfig.from_dict(raw)
    if "input_size" not in raw["arch"]:
        config.arch.input_size = tuple(config.data.size)
    if "seed" not in raw["federation"]:
        config.federation.seed = config.seed
    return config
