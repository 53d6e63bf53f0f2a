#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Evaluation Analyzer

Scores trained models: per-slice DICE on the lesioned test sets, SSIM on
healthy test sets, SAS/SCS disentanglement scores from exported latent
embeddings, and the MetricsReport that gathers them per model label.

MIT License
See LICENSE file for full license text.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from ..data.batching import stack_slices
from ..exceptions import InputError, ShapeError, UndefinedBaselineError
from ..models import EmbeddingRecord, PostprocessConfig, ScanSlice, SegmentationMask
from ..network.autoencoder import build_module, gamma_shift
from ..network.params import ModelParams
from ..utils.calculations import EvaluationMetrics, shape_appearance_similarity, stratify_scores
from ..utils.seeding import make_rng
from .base_analyzer import BaseAnalyzer, MultiAnalyzer
from .segmentation import segment_dataset

logger = logging.getLogger(__name__)

DICE_COLUMNS = ["model", "dataset", "slice_id", "dice", "lesion_area_mm2"]
FLOAT_FORMAT = "%.10g"


def export_embeddings(
    model: ModelParams,
    datasets: Dict[str, List[ScanSlice]],
    gamma_range: Tuple[float, float] = (0.5, 2.0),
    seed: int = 0,
    batch_size: int = 32,
) -> List[EmbeddingRecord]:
    """Flattened z_S, z_A and z_gS per slice in evaluation mode.

    The gamma used for z_gS is drawn per slice from a stream keyed by the
    seed, so re-exports are identical. Single-path models carry no z_A and
    export shape and shape_gamma records only.

    Args:
        model: Trained parameters
        datasets: Slices keyed by client/site id
        gamma_range: Range of the intensity shift applied for z_gS
        seed: Seed of the gamma stream

    Returns:
        EmbeddingRecords ordered by client, slice and kind
    """
    module = build_module(model)
    records: List[EmbeddingRecord] = []
    for client_id in sorted(datasets):
        slices = datasets[client_id]
        if not slices:
            continue
        rng = make_rng(seed, "embeddings", client_id)
        gammas = rng.uniform(gamma_range[0], gamma_range[1], size=len(slices))
        x_all, mask_all = stack_slices(slices)
        with torch.no_grad():
            for start in range(0, len(slices), batch_size):
                stop = start + batch_size
                xb, mb = x_all[start:stop], mask_all[start:stop]
                z_s, z_a = module.encode(xb)
                z_gs = module.shape_encoder(gamma_shift(xb, torch.as_tensor(gammas[start:stop]), mb))
                for i, scan in enumerate(slices[start:stop]):
                    records.append(EmbeddingRecord(client_id, scan.slice_id, "shape", z_s[i].flatten().numpy()))
                    if z_a.shape[1]:
                        records.append(EmbeddingRecord(client_id, scan.slice_id, "appearance", z_a[i].flatten().numpy()))
                    records.append(EmbeddingRecord(client_id, scan.slice_id, "shape_gamma", z_gs[i].flatten().numpy()))
    return records


def save_embeddings(records: Sequence[EmbeddingRecord], path: Path) -> Path:
    """CSV with header client_id, slice_id, kind, v0..v_{d-1}."""
    if not records:
        raise ShapeError("No embedding records to save")
    dims = {len(r.vector) for r in records}
    if len(dims) != 1:
        raise ShapeError(f"Embedding records disagree on dimensionality: {sorted(dims)}")
    vectors = np.stack([r.vector for r in records])
    frame = pd.DataFrame(vectors, columns=[f"v{i}" for i in range(vectors.shape[1])])
    frame.insert(0, "kind", [r.kind for r in records])
    frame.insert(0, "slice_id", [r.slice_id for r in records])
    frame.insert(0, "client_id", [r.client_id for r in records])
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Saved %d embedding records to %s", len(records), path)
    return path


class SegmentationAnalyzer(MultiAnalyzer):
    """Segments every lesioned test set with every model and scores DICE."""

    def __init__(self, models, data, metrics_config=None, postprocess: Optional[PostprocessConfig] = None):
        super().__init__(models, data, metrics_config)
        self.postprocess = postprocess or PostprocessConfig()
        self.segmentations: Dict[Tuple[str, str], List[SegmentationMask]] = {}

    def analyze_all(self) -> Dict[str, pd.DataFrame]:
        pixel_area = self.config.pixel_spacing_mm ** 2
        rows = []
        for label, params in self.models.items():
            for dataset, slices in self.data.lesioned_tests().items():
                masks = segment_dataset(params, slices, self.postprocess)
                self.segmentations[(label, dataset)] = masks
                for scan, mask in zip(slices, masks):
                    rows.append({
                        "model": label,
                        "dataset": dataset,
                        "slice_id": scan.slice_id,
                        "dice": self.calc.dice(mask, scan.lesion_mask),
                        "lesion_area_mm2": float(scan.lesion_mask.sum()) * pixel_area,
                    })
        dice_scores = pd.DataFrame(rows, columns=DICE_COLUMNS)
        self.log_analysis_summary(dice_scores, "dice_scores")
        return {
            "dice_scores": dice_scores,
            "stratified_dice": stratified_by_model(dice_scores, self.config.area_buckets_mm2),
        }


class ReconstructionAnalyzer(BaseAnalyzer):
    """Mean SSIM of reconstructions on healthy client and unseen-site test slices."""

    def _mean_ssim(self, params: ModelParams, slices: List[ScanSlice]) -> float:
        if not slices:
            return float("nan")
        module = build_module(params)
        x_all, _ = stack_slices(slices)
        scores = []
        with torch.no_grad():
            for start in range(0, len(slices), 32):
                x_rec = module(x_all[start:start + 32])[:, 0].numpy()
                for scan, rec in zip(slices[start:start + 32], x_rec):
                    scores.append(self.calc.ssim(scan.pixels, np.clip(rec, 0.0, 1.0)))
        return float(np.mean(scores))

    def analyze(self) -> pd.DataFrame:
        test = self.data.healthy_tests("client")
        healthy = self.data.healthy_tests("unseen")
        rows = [
            {"model": label, "ssim_test": self._mean_ssim(p, test), "ssim_healthy": self._mean_ssim(p, healthy)}
            for label, p in self.models.items()
        ]
        return pd.DataFrame(rows, columns=["model", "ssim_test", "ssim_healthy"])


class DisentanglementAnalyzer(BaseAnalyzer):
    """SAS/SCS per model on healthy unseen-site slices (client tests if none)."""

    def __init__(self, models, data, metrics_config=None, gamma_range=(0.5, 2.0), seed: int = 0):
        super().__init__(models, data, metrics_config)
        self.gamma_range = gamma_range
        self.seed = seed
        self.records: Dict[str, List[EmbeddingRecord]] = {}

    def embedding_sets(self) -> Dict[str, List[ScanSlice]]:
        role = "unseen" if self.data.site_ids("unseen") else "client"
        return {s: self.data.datasets[s][0].test for s in self.data.site_ids(role)}

    def analyze(self) -> pd.DataFrame:
        rows = []
        for label, params in self.models.items():
            records = export_embeddings(params, self.embedding_sets(), self.gamma_range, self.seed)
            self.records[label] = records
            sas, scs = shape_appearance_similarity(records)
            rows.append({"model": label, "sas": sas, "scs": scs})
        return pd.DataFrame(rows, columns=["model", "sas", "scs"])


def stratified_by_model(dice_scores: pd.DataFrame, buckets: Sequence[float]) -> pd.DataFrame:
    """Lesion-size stratified DICE for every model label."""
    tables = []
    for label, group in dice_scores.groupby("model", sort=True):
        table = stratify_scores(group["dice"], group["lesion_area_mm2"], buckets)
        table.insert(0, "model", label)
        tables.append(table)
    if not tables:
        return pd.DataFrame(columns=["model", "bucket", "mean", "std", "count"])
    return pd.concat(tables, ignore_index=True)


def baseline_labels(labels: Sequence[str], baseline: Optional[str]) -> List[str]:
    """Model labels that make up a baseline (a label or a strategy with per-client rows)."""
    if not baseline:
        return []
    return [l for l in labels if l == baseline or l.startswith(f"{baseline}/")]


def summarize_models(
    dice_scores: pd.DataFrame, baseline: Optional[str] = None, significance: float = 0.05
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-dataset DICE table and per-model summary with RI and KS vs a baseline.

    RI compares across-dataset mean DICE; the KS test compares pooled
    per-slice DICE samples.
    """
    per_dataset = (
        dice_scores.groupby(["model", "dataset"], sort=True)["dice"]
        .agg(dice_mean="mean", dice_std="std", n_slices="count")
        .reset_index()
    )
    per_dataset["dice_std"] = per_dataset["dice_std"].fillna(0.0)

    labels = sorted(per_dataset["model"].unique())
    mean_dice = per_dataset.groupby("model")["dice_mean"].mean()
    base = baseline_labels(labels, baseline)
    base_mean = float(mean_dice[base].mean()) if base else float("nan")
    base_sample = dice_scores.loc[dice_scores["model"].isin(base), "dice"].to_numpy()

    rows = []
    for label in labels:
        row = {"model": label, "mean_dice": float(mean_dice[label]), "ri": np.nan,
               "ks_statistic": np.nan, "p_value": np.nan, "significant": False}
        if base:
            try:
                row["ri"] = EvaluationMetrics.relative_improvement(row["mean_dice"], base_mean)
            except UndefinedBaselineError:
                logger.warning("Baseline %s has zero mean DICE; RI left undefined", baseline)
            sample = dice_scores.loc[dice_scores["model"] == label, "dice"].to_numpy()
            row["ks_statistic"], row["p_value"] = EvaluationMetrics.ks_test(sample, base_sample)
            row["significant"] = bool(row["p_value"] <= significance)
        rows.append(row)
    return per_dataset, pd.DataFrame(rows)


@dataclass
class MetricsReport:
    """Evaluation results keyed by model label."""

    per_dataset: pd.DataFrame
    summary: pd.DataFrame
    stratified: pd.DataFrame = field(default_factory=pd.DataFrame)
    baseline: Optional[str] = None

    @classmethod
    def build(
        cls,
        dice_scores: pd.DataFrame,
        reconstruction: pd.DataFrame,
        disentanglement: pd.DataFrame,
        buckets: Sequence[float],
        baseline: Optional[str] = None,
        significance: float = 0.05,
    ) -> "MetricsReport":
        per_dataset, summary = summarize_models(dice_scores, baseline, significance)
        summary = summary.merge(reconstruction, on="model", how="left").merge(disentanglement, on="model", how="left")
        report = cls(per_dataset, summary, stratified_by_model(dice_scores, buckets), baseline)
        report.validate()
        return report

    def validate(self) -> None:
        dice = self.per_dataset["dice_mean"]
        if ((dice < 0) | (dice > 1)).any():
            raise InputError("DICE entries must lie in [0,1]")
        for column in ("ssim_test", "ssim_healthy"):
            if column in self.summary:
                values = self.summary[column].dropna()
                if ((values < -1) | (values > 1)).any():
                    raise InputError(f"{column} entries must lie in [-1,1]")

    def table(self) -> pd.DataFrame:
        """Wide table: one row per model, DICE mean/std columns per dataset."""
        wide = self.per_dataset.pivot(index="model", columns="dataset", values=["dice_mean", "dice_std"])
        wide.columns = [f"{dataset}_{stat}" for stat, dataset in wide.columns]
        wide = wide[sorted(wide.columns)].reset_index()
        return wide.merge(self.summary, on="model", how="left")

    def save(self, out_dir: Path) -> List[Path]:
        """Write metrics.csv and stratified_dice.csv."""
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_file = out_dir / "metrics.csv"
        stratified_file = out_dir / "stratified_dice.csv"
        self.table().to_csv(metrics_file, index=False, float_format=FLOAT_FORMAT)
        self.stratified.to_csv(stratified_file, index=False, float_format=FLOAT_FORMAT)
        return [metrics_file, stratified_file]
