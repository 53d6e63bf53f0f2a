#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Strategy Comparison

Builds one comparison table from several completed runs that share the same
generated data: mean ± std DICE per dataset, RI and KS p-values against a
baseline, SSIM and SAS/SCS columns.

MIT License
See LICENSE file for full license text.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from ..exceptions import InputError
from ..services.manifest_service import ManifestService
from .evaluation_analyzer import MetricsReport, baseline_labels

logger = logging.getLogger(__name__)


def _read_run_tables(run_dir: Path):
    dice = pd.read_csv(run_dir / "segment" / "dice_scores.csv")
    reconstruction = pd.read_csv(run_dir / "evaluate" / "reconstruction.csv")
    disentanglement = pd.read_csv(run_dir / "evaluate" / "disentanglement.csv")
    return dice, reconstruction, disentanglement


def run_tags(run_dirs: Sequence[Path]) -> List[str]:
    """One distinct tag per run: the directory name, numbered when names repeat."""
    names = [d.name for d in run_dirs]
    if len(set(names)) == len(names):
        return names
    return [f"{name}#{i}" for i, name in enumerate(names)]


def tag_label(label: str, tag: str) -> str:
    """Insert the run tag after the strategy part: local_only/site_a -> local_only@run/site_a."""
    head, sep, rest = label.partition("/")
    return f"{head}@{tag}{sep}{rest}"


def resolve_baseline(baseline: str, run_labels: Sequence[List[str]], tags: Sequence[str],
                     renamed: Dict[str, bool]) -> str:
    """Baseline label as it appears in the combined table.

    A baseline given by its original label that several runs share refers
    to the first run listing it; "label@tag" names another run explicitly.

    Raises:
        InputError: no run holds a model matching the baseline
    """
    combined = [
        tag_label(label, tag) if renamed[label.partition("/")[0]] else label
        for labels, tag in zip(run_labels, tags)
        for label in labels
    ]
    if baseline_labels(combined, baseline):
        return baseline
    for labels, tag in zip(run_labels, tags):
        if baseline_labels(labels, baseline):
            resolved = tag_label(baseline, tag)
            logger.info(f"Baseline {baseline} is shared by several runs; using {resolved}")
            return resolved
    raise InputError(f"Baseline {baseline} matches no model in the compared runs: {sorted(set(combined))}")


def compare_strategies(
    runs: Sequence[Union[str, Path]],
    baseline: str,
    buckets: Sequence[float] = (12.0, 36.0, 100.0),
    significance: float = 0.05,
) -> MetricsReport:
    """Comparison report across run directories.

    Strategies whose labels occur in more than one run get the run tag
    inserted ("feddis@ablation-no-lcl", "local_only@run-2/site_a").

    Raises:
        InputError: runs were made on different generated data, or the
            baseline matches no model
    """
    run_dirs = [Path(r) for r in runs]
    if not run_dirs:
        raise InputError("Nothing to compare")
    manifests = [ManifestService(str(d)).load() for d in run_dirs]
    hashes = {m.data_hash for m in manifests}
    if len(hashes) != 1:
        raise InputError(f"Runs use different data (hashes {sorted(h[:12] for h in hashes)}); comparison refused")

    tables = [_read_run_tables(d) for d in run_dirs]
    tags = run_tags(run_dirs)
    run_labels = [sorted(dice["model"].unique()) for dice, _, _ in tables]
    head_runs: Dict[str, int] = {}
    for labels in run_labels:
        for head in {label.partition("/")[0] for label in labels}:
            head_runs[head] = head_runs.get(head, 0) + 1
    renamed = {head: count > 1 for head, count in head_runs.items()}
    resolved = resolve_baseline(baseline, run_labels, tags, renamed)

    dice_frames: List[pd.DataFrame] = []
    reconstruction_frames: List[pd.DataFrame] = []
    disentanglement_frames: List[pd.DataFrame] = []
    for tag, labels, (dice, reconstruction, disentanglement) in zip(tags, run_labels, tables):
        rename = {l: tag_label(l, tag) for l in labels if renamed[l.partition("/")[0]]}
        dice_frames.append(dice.replace({"model": rename}))
        reconstruction_frames.append(reconstruction.replace({"model": rename}))
        disentanglement_frames.append(disentanglement.replace({"model": rename}))

    report = MetricsReport.build(
        pd.concat(dice_frames, ignore_index=True),
        pd.concat(reconstruction_frames, ignore_index=True),
        pd.concat(disentanglement_frames, ignore_index=True),
        buckets,
        baseline=resolved,
        significance=significance,
    )
    logger.info(f"Compared {len(report.summary)} models from {len(run_dirs)} runs against {resolved}")
    return report
