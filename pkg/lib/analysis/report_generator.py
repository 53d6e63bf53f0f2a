#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Report Generator

Generates the markdown report of a run or comparison: a results table with
one row per model (DICE per dataset, RI, SSIM), disentanglement scores,
lesion-size stratified DICE, the training summary and figure links.

MIT License
See LICENSE file for full license text.
"""

import pandas as pd
from pathlib import Path
from typing import List, Optional
import logging

from ..models.config import ExperimentConfig, PostprocessConfig
from ..utils.formatters import DataFormatter
from .evaluation_analyzer import MetricsReport

logger = logging.getLogger(__name__)


class ReportGenerator:
    """Generates report.md for evaluation results."""

    def __init__(self, report_dir: str = "report") -> None:
        self.report_dir = Path(report_dir)
        self.formatter = DataFormatter()

    def generate_report(
        self,
        report: MetricsReport,
        config: Optional[ExperimentConfig] = None,
        rounds: Optional[pd.DataFrame] = None,
        viz_paths: Optional[List[str]] = None,
        significance: float = 0.05,
    ) -> str:
        """Build the markdown report."""
        title = config.name if config else "comparison"
        content = [f"# FedDis results: {title}"]
        if config:
            fed = config.federation
            content.extend([
                "\n## Setup",
                f"- **Strategy**: {fed.strategy} (loss mode {fed.loss_mode})",
                f"- **Rounds**: {fed.rounds} × {fed.local_epochs} local epochs, batch size {fed.batch_size}",
                f"- **Image size**: {config.data.size[0]}×{config.data.size[1]}",
                f"- **Sites**: {len(config.data.client_sites())} clients, {len(config.data.unseen_sites())} unseen",
                f"- **Seed**: {config.seed}",
                f"- **Config hash**: `{config.config_hash()[:16]}`",
            ])

        content.extend(self._generate_results_section(report, significance))
        content.extend(self._generate_disentanglement_section(report))
        content.extend(self._generate_stratified_section(report))
        if rounds is not None and not rounds.empty:
            content.extend(self._generate_training_section(rounds))
        if viz_paths:
            content.append("\n## Figures")
            for path in viz_paths:
                name = Path(path).stem.replace("_", " ").title()
                content.append(f"\n### {name}\n\n![{name}]({self._relative_path(path)})")
        content.extend(self._generate_methodology_section(config.postprocess if config else None))
        return "\n".join(content) + "\n"

    def _generate_results_section(self, report: MetricsReport, significance: float) -> List[str]:
        per_dataset = report.per_dataset
        datasets = sorted(per_dataset["dataset"].unique())
        header = ["Model"] + datasets + ["Mean DICE", "RI", "KS p", "SSIM Test", "SSIM Healthy"]
        content = [
            "\n## Anomaly segmentation",
            "\nMean ± std DICE per dataset. RI is the relative improvement of the mean DICE "
            f"over `{report.baseline or 'n/a'}`; * marks KS-test p ≤ {significance:g}.",
            "\n| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ]
        for _, row in report.summary.iterrows():
            cells = [f"**{row['model']}**"]
            for dataset in datasets:
                match = per_dataset[(per_dataset["model"] == row["model"]) & (per_dataset["dataset"] == dataset)]
                if match.empty:
                    cells.append("N/A")
                else:
                    cells.append(self.formatter.format_mean_std(match["dice_mean"].iloc[0], match["dice_std"].iloc[0]))
            cells.append(f"{row['mean_dice']:.3f}")
            ri = self.formatter.format_percentage(row.get("ri"))
            if ri != "N/A" and row.get("significant"):
                ri += "*"
            cells.append(ri)
            cells.append(self.formatter.format_p_value(row.get("p_value"), significance))
            for column in ("ssim_test", "ssim_healthy"):
                value = row.get(column)
                cells.append("N/A" if value is None or pd.isna(value) else f"{value:.3f}")
            content.append("| " + " | ".join(cells) + " |")
        return content

    def _generate_disentanglement_section(self, report: MetricsReport) -> List[str]:
        if not {"sas", "scs"} <= set(report.summary.columns):
            return []
        content = [
            "\n## Latent disentanglement",
            "\nSAS: cosine similarity of shape and appearance embeddings (lower is better). "
            "SCS: cosine similarity of shape embeddings under an intensity shift (higher is better).",
            "\n| Model | SAS | SCS |",
            "| ----- | --- | --- |",
        ]
        for _, row in report.summary.iterrows():
            sas = "N/A" if pd.isna(row["sas"]) else f"{row['sas']:.3f}"
            scs = "N/A" if pd.isna(row["scs"]) else f"{row['scs']:.3f}"
            content.append(f"| **{row['model']}** | {sas} | {scs} |")
        return content

    def _generate_stratified_section(self, report: MetricsReport) -> List[str]:
        if report.stratified is None or report.stratified.empty:
            return []
        content = [
            "\n## DICE by lesion area",
            "\n| Model | Lesion area (mm²) | Mean DICE | Slices |",
            "| ----- | ----------------- | --------- | ------ |",
        ]
        for _, row in report.stratified.iterrows():
            content.append(
                f"| {row['model']} | {row['bucket']} | "
                f"{self.formatter.format_mean_std(row['mean'], row['std'])} | {int(row['count'])} |"
            )
        return content

    def _generate_training_section(self, rounds: pd.DataFrame) -> List[str]:
        first, last = rounds.iloc[0], rounds.iloc[-1]
        drop = 1.0 - last["val_rec_loss"] / first["val_rec_loss"] if first["val_rec_loss"] else float("nan")
        return [
            "\n## Training",
            f"- **Rounds completed**: {len(rounds)}",
            f"- **Validation L_Rec**: {first['val_rec_loss']:.5f} (round 1) → {last['val_rec_loss']:.5f} "
            f"(round {int(last['round']) + 1}), a {self.formatter.format_percentage(drop)} reduction",
            f"- **Final mean client loss**: {last['mean_client_loss']:.5f}",
        ]

    def _generate_methodology_section(self, postprocess: Optional[PostprocessConfig]) -> List[str]:
        if postprocess:
            settings = (
                f"thresholded at the per-image {postprocess.percentile:g}th percentile, "
                f"with components under {postprocess.min_area} pixels removed."
            )
        else:
            settings = "thresholded at a per-image percentile, with small components removed."
        return [
            "\n## Methodology",
            "\n- Segmentations come from the positive reconstruction residual inside an eroded brain mask, "
            f"median filtered, {settings}",
            "- Healthy SSIM is measured on sites that never took part in training.",
            "- Slices without lesions are not stratified by area.",
        ]

    def _relative_path(self, viz_path: str) -> str:
        """Convert a figure path to one relative to the report."""
        try:
            return str(Path(viz_path).resolve().relative_to(self.report_dir.resolve()))
        except ValueError:
            return viz_path

    def save_report(self, content: str) -> str:
        """Save report.md to the report directory."""
        self.report_dir.mkdir(parents=True, exist_ok=True)
        report_path = self.report_dir / "report.md"
        with open(report_path, 'w', encoding='utf-8') as f:
            f.write(content)
        logger.info(f"Report saved to {report_path}")
        return str(report_path)
