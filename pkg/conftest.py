"""Shared pytest fixtures: tiny architectures and phantom clients."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from lib.data.phantom_generator import generate_phantom_client
from lib.models import AppearanceProfile, ArchConfig, FederationConfig

TINY_SIZE = (32, 32)

TINY_PROFILES = {
    "site_a": AppearanceProfile(),
    "site_b": AppearanceProfile(brightness_offset=0.08, contrast_gain=0.8, gamma=0.7, noise_sigma=0.02),
    "site_c": AppearanceProfile(brightness_offset=-0.05, contrast_gain=1.2, gamma=1.5, smoothing_radius=1.0),
}


def in_mask_intensities(slices, exclude_lesions=False):
    """Concatenated in-brain pixel values of a slice list."""
    values = []
    for scan in slices:
        mask = scan.brain_mask.astype(bool)
        if exclude_lesions and scan.lesion_mask is not None:
            mask = mask & ~scan.lesion_mask
        values.append(scan.pixels[mask])
    return np.concatenate(values) if values else np.empty(0)


@pytest.fixture
def tiny_arch():
    """32x32 input, 2x2 bottleneck with 8 channels."""
    return ArchConfig(
        base_filters=8,
        max_filters=16,
        bottleneck_channels=8,
        dropout=0.1,
        input_size=TINY_SIZE,
    )


@pytest.fixture
def tiny_clients():
    """Three small phantom clients with distinct appearance profiles."""
    return [
        generate_phantom_client(
            seed=100 + i,
            profile=profile,
            counts={"train": 8, "val": 2, "test": 2},
            size=TINY_SIZE,
            client_id=site_id,
        )
        for i, (site_id, profile) in enumerate(TINY_PROFILES.items())
    ]


@pytest.fixture
def tiny_federation():
    return FederationConfig(
        rounds=2,
        local_epochs=1,
        batch_size=4,
        lr0=1e-3,
        strategy="feddis",
        seed=7,
    )


def tiny_raw_config(output_dir, strategy="feddis", rounds=1):
    """Raw experiment config for end-to-end runs at 32x32."""
    counts = {"train": 4, "val": 1, "test": 2}
    return {
        "name": "tiny",
        "seed": 3,
        "output_dir": str(output_dir),
        "data": {
            "size": list(TINY_SIZE),
            "sites": [
                {"site_id": "site_a", "counts": counts},
                {"site_id": "site_b", "counts": counts, "profile": TINY_PROFILES["site_b"].to_dict()},
                {"site_id": "site_u", "role": "unseen", "counts": {"train": 0, "val": 0, "test": 2},
                 "profile": TINY_PROFILES["site_c"].to_dict()},
            ],
        },
        "arch": {"base_filters": 8, "max_filters": 16, "bottleneck_channels": 8, "dropout": 0.1},
        "federation": {"rounds": rounds, "local_epochs": 1, "batch_size": 4, "lr0": 1e-3, "strategy": strategy},
        "metrics": {"baseline": strategy},
    }


@pytest.fixture
def raw_config(tmp_path):
    return tiny_raw_config(tmp_path / "run")
