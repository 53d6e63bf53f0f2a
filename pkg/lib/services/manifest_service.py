#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Manifest Service

Run manifests: stage completion, artifact paths and the hashes that guard
resumption. Also hosts the JSON helpers shared by the other services.

MIT License
See LICENSE file for full license text.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from .. import __version__
from ..exceptions import FederationStateError
from ..models import RunManifest

STAGES = ("data", "train", "segment", "evaluate", "report")


def save_json(file_path: Path, data: Any) -> None:
    """Save data as JSON (sorted keys, so reruns write identical bytes).

    Args:
        file_path: Path to save to
        data: Data to save
    """
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
    except Exception as e:
        logging.error("Failed to save %s: %s", file_path, str(e))
        raise


def load_json(file_path: Path) -> Any:
    """Load data from a JSON file.

    Raises:
        FileNotFoundError: if the file does not exist
    """
    if not file_path.exists():
        raise FileNotFoundError(f"Missing artifact: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        return json.load(f)


class ManifestService:
    """Reads and updates the manifest of one run directory."""

    def __init__(self, run_dir: str):
        self.run_dir = Path(run_dir)
        self.manifest_file = self.run_dir / "manifest.json"

    def exists(self) -> bool:
        return self.manifest_file.exists()

    def load(self) -> RunManifest:
        return RunManifest.from_dict(load_json(self.manifest_file))

    def save(self, manifest: RunManifest) -> None:
        save_json(self.manifest_file, manifest.to_dict())

    def open_run(self, config_hash: str, data_hash: str, resume: bool = True) -> RunManifest:
        """Start a new manifest or reopen an existing one for resumption.

        Raises:
            FederationStateError: the existing run was made with another config
        """
        if self.exists() and resume:
            manifest = self.load()
            if manifest.config_hash != config_hash:
                raise FederationStateError(
                    f"Run directory {self.run_dir} belongs to config {manifest.config_hash[:12]}, "
                    f"refusing to resume with {config_hash[:12]}"
                )
            missing = self.missing_artifacts(manifest)
            for stage in {stage for stage, _ in missing}:
                logging.warning("Stage %s has missing artifacts; it will run again", stage)
                manifest.stages.pop(stage, None)
            return manifest
        manifest = RunManifest(config_hash=config_hash, data_hash=data_hash, code_version=__version__)
        self.save(manifest)
        return manifest

    def mark_complete(self, manifest: RunManifest, stage: str, artifacts: List[Path]) -> None:
        """Record a finished stage with its artifacts (paths relative to the run)."""
        manifest.artifacts[stage] = sorted(
            str(Path(a).resolve().relative_to(self.run_dir.resolve())) for a in artifacts
        )
        manifest.stages[stage] = "complete"
        self.save(manifest)
        logging.info("Stage %s complete (%d artifacts)", stage, len(artifacts))

    def invalidate_from(self, manifest: RunManifest, stage: str) -> None:
        """Forget a stage and every later stage."""
        for later in STAGES[STAGES.index(stage):]:
            manifest.stages.pop(later, None)
            manifest.artifacts.pop(later, None)
        self.save(manifest)

    def missing_artifacts(self, manifest: RunManifest, stage: Optional[str] = None) -> List[tuple]:
        """(stage, path) pairs referenced by the manifest but absent on disk."""
        stages = [stage] if stage else list(manifest.artifacts)
        return [
            (name, path)
            for name in stages
            for path in manifest.artifacts.get(name, [])
            if not (self.run_dir / path).exists()
        ]

    def summary(self, manifest: RunManifest) -> Dict[str, str]:
        return {stage: manifest.stages.get(stage, "pending") for stage in STAGES}
