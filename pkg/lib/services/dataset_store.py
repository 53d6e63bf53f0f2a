#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Dataset Store

Persists generated site datasets as a directory of 16-bit grayscale PNG
slices with 1-bit PNG masks and a manifest.json listing slice ids, splits,
profiles and seeds.

Layout:
    <root>/manifest.json
    <root>/<site_id>/<split>/<slice_id>.png           16-bit pixels
    <root>/<site_id>/<split>/<slice_id>_brain.png     1-bit brain mask
    <root>/<site_id>/test_lesioned/<slice_id>_lesion.png

MIT License
See LICENSE file for full license text.
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image

from ..models import AppearanceProfile, ClientDataset, ScanSlice
from ..models.config import DataSpec
from .manifest_service import load_json, save_json

logger = logging.getLogger(__name__)

PIXEL_SCALE = 65535
SiteDatasets = Dict[str, Tuple[ClientDataset, ClientDataset]]


def encode_pixels(pixels: np.ndarray) -> np.ndarray:
    """Intensities in [0,1] as the 16-bit values written to PNG."""
    return np.round(np.clip(pixels, 0.0, 1.0) * PIXEL_SCALE).astype(np.uint16)


class DatasetStore:
    """Saves and loads generated site datasets."""

    def __init__(self, root: str):
        """Initialize dataset store.

        Args:
            root: Dataset directory
        """
        self.root = Path(root)
        self.manifest_file = self.root / "manifest.json"

    def exists(self) -> bool:
        return self.manifest_file.exists()

    def _write_slice(self, directory: Path, scan: ScanSlice, with_lesion: bool) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        Image.fromarray(encode_pixels(scan.pixels)).save(directory / f"{scan.slice_id}.png")
        Image.fromarray(scan.brain_mask.astype(bool)).save(directory / f"{scan.slice_id}_brain.png")
        if with_lesion:
            Image.fromarray(scan.lesion_mask.astype(bool)).save(directory / f"{scan.slice_id}_lesion.png")

    @staticmethod
    def _read_slice(directory: Path, slice_id: str, with_lesion: bool) -> ScanSlice:
        with Image.open(directory / f"{slice_id}.png") as image:
            pixels = np.asarray(image, dtype=np.float64) / PIXEL_SCALE
        with Image.open(directory / f"{slice_id}_brain.png") as image:
            brain = np.asarray(image).astype(bool)
        lesion = None
        if with_lesion:
            with Image.open(directory / f"{slice_id}_lesion.png") as image:
                lesion = np.asarray(image).astype(bool)
        return ScanSlice(slice_id=slice_id, pixels=pixels, brain_mask=brain, lesion_mask=lesion)

    def save(self, datasets: SiteDatasets, data_spec: DataSpec, data_hash: str) -> List[Path]:
        """Write every site's healthy splits and lesioned test set.

        Returns:
            Written artifact paths (manifest and site directories)
        """
        roles = {site.site_id: site.role for site in data_spec.sites}
        sites = {}
        try:
            for site_id, (healthy, lesioned) in datasets.items():
                site_dir = self.root / site_id
                for split, slices in healthy.splits().items():
                    for scan in slices:
                        self._write_slice(site_dir / split, scan, with_lesion=False)
                for scan in lesioned.test:
                    self._write_slice(site_dir / "test_lesioned", scan, with_lesion=True)
                sites[site_id] = {
                    "role": roles.get(site_id, "client"),
                    "seed": healthy.seed,
                    "profile": healthy.profile.to_dict(),
                    "splits": {split: [s.slice_id for s in slices] for split, slices in healthy.splits().items()},
                    "test_lesioned": [s.slice_id for s in lesioned.test],
                }
        except OSError as e:
            logger.error("Failed to write dataset under %s: %s", self.root, e)
            raise

        save_json(self.manifest_file, {
            "data_hash": data_hash,
            "size": list(data_spec.size),
            "sites": sites,
        })
        logger.info("Saved %d sites to %s", len(sites), self.root)
        return [self.manifest_file] + [self.root / site_id for site_id in sites]

    def load_manifest(self) -> Dict:
        return load_json(self.manifest_file)

    def load(self) -> SiteDatasets:
        """Load (healthy, lesioned) datasets per site as persisted (16-bit values)."""
        manifest = self.load_manifest()
        datasets: SiteDatasets = {}
        for site_id, entry in manifest["sites"].items():
            site_dir = self.root / site_id
            profile = AppearanceProfile.from_dict(entry["profile"])
            splits = {
                split: [self._read_slice(site_dir / split, sid, with_lesion=False) for sid in ids]
                for split, ids in entry["splits"].items()
            }
            healthy = ClientDataset(
                client_id=site_id, train=splits["train"], val=splits["val"], test=splits["test"],
                profile=profile, seed=entry["seed"],
            )
            lesioned = ClientDataset(
                client_id=site_id,
                train=healthy.train,
                val=healthy.val,
                test=[self._read_slice(site_dir / "test_lesioned", sid, with_lesion=True)
                      for sid in entry["test_lesioned"]],
                profile=profile,
                seed=entry["seed"],
            )
            datasets[site_id] = (healthy, lesioned)
        logger.info("Loaded %d sites from %s", len(datasets), self.root)
        return datasets

    def roles(self) -> Dict[str, str]:
        """site_id -> role from the manifest."""
        return {site_id: entry["role"] for site_id, entry in self.load_manifest()["sites"].items()}
