#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Results Visualizer

Figures for the run report: training curves, SAS/SCS bars, DICE per
dataset and DICE stratified by lesion area.

MIT License
See LICENSE file for full license text.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

logger = logging.getLogger(__name__)


class ResultsVisualizer:
    """Creates the report figures of one run or comparison."""

    def __init__(self, output_dir: str = "report/visuals"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

        plt.style.use('seaborn-v0_8-darkgrid')
        sns.set_palette("husl")

        plt.rcParams['figure.dpi'] = 100
        plt.rcParams['savefig.dpi'] = 150

    def create_all_visualizations(self, results: Dict[str, pd.DataFrame]) -> List[str]:
        """Create every figure whose input table is present and non-empty."""
        builders = [
            ("rounds", self.create_training_curves),
            ("summary", self.create_disentanglement_chart),
            ("dice_scores", self.create_dice_chart),
            ("stratified_dice", self.create_stratified_dice_chart),
        ]
        viz_paths = []
        for key, builder in builders:
            df = results.get(key)
            if df is None or df.empty:
                continue
            path = builder(df)
            if path:
                viz_paths.append(path)
        logger.info(f"Created {len(viz_paths)} figures in {self.output_dir}")
        return viz_paths

    def create_training_curves(self, rounds: pd.DataFrame) -> Optional[str]:
        """Mean client loss and validation L_Rec per round."""
        try:
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 4.5))
            x = rounds['round'] + 1

            ax1.plot(x, rounds['mean_client_loss'], marker='o', color='steelblue')
            ax1.set_xlabel('Round', fontweight='bold')
            ax1.set_ylabel('Mean client loss (last local epoch)', fontweight='bold')
            ax1.set_title('Training objective', fontsize=12, fontweight='bold')
            ax1.grid(True, alpha=0.3)

            ax2.plot(x, rounds['val_rec_loss'], marker='o', color='darkorange')
            ax2.set_xlabel('Round', fontweight='bold')
            ax2.set_ylabel('Validation L_Rec', fontweight='bold')
            ax2.set_title('Global validation reconstruction', fontsize=12, fontweight='bold')
            ax2.grid(True, alpha=0.3)

            plt.tight_layout()
            output_path = self.output_dir / "training_curves.png"
            plt.savefig(output_path, bbox_inches='tight')
            plt.close(fig)
            return str(output_path)
        except Exception as e:
            logger.error(f"Error creating training curves: {e}")
            plt.close('all')
            return None

    def create_disentanglement_chart(self, summary: pd.DataFrame) -> Optional[str]:
        """SAS (lower is better) and SCS (higher is better) per model."""
        if not {'sas', 'scs'} <= set(summary.columns):
            return None
        try:
            melted = summary.melt(id_vars='model', value_vars=['sas', 'scs'], var_name='score', value_name='cosine')
            melted = melted.dropna(subset=['cosine'])
            if melted.empty:
                return None
            melted['score'] = melted['score'].str.upper()

            fig, ax = plt.subplots(figsize=(max(6, 1.6 * summary['model'].nunique()), 4.5))
            sns.barplot(data=melted, x='model', y='cosine', hue='score', ax=ax)
            ax.set_xlabel('')
            ax.set_ylabel('Cosine similarity', fontweight='bold')
            ax.set_title('Latent disentanglement (SAS lower, SCS higher)', fontsize=12, fontweight='bold')
            ax.tick_params(axis='x', rotation=30)
            plt.tight_layout()

            output_path = self.output_dir / "sas_scs.png"
            plt.savefig(output_path, bbox_inches='tight')
            plt.close(fig)
            return str(output_path)
        except Exception as e:
            logger.error(f"Error creating disentanglement chart: {e}")
            plt.close('all')
            return None

    def create_dice_chart(self, dice_scores: pd.DataFrame) -> Optional[str]:
        """Per-slice DICE distribution per dataset and model."""
        try:
            fig, ax = plt.subplots(figsize=(max(7, 1.4 * dice_scores['dataset'].nunique() * 2), 4.5))
            sns.boxplot(data=dice_scores, x='dataset', y='dice', hue='model', ax=ax, fliersize=2)
            ax.set_ylim(0, 1)
            ax.set_xlabel('Dataset', fontweight='bold')
            ax.set_ylabel('DICE', fontweight='bold')
            ax.set_title('Anomaly segmentation DICE per dataset', fontsize=12, fontweight='bold')
            plt.tight_layout()

            output_path = self.output_dir / "dice_per_dataset.png"
            plt.savefig(output_path, bbox_inches='tight')
            plt.close(fig)
            return str(output_path)
        except Exception as e:
            logger.error(f"Error creating DICE chart: {e}")
            plt.close('all')
            return None

    def create_stratified_dice_chart(self, stratified: pd.DataFrame) -> Optional[str]:
        """Mean DICE per lesion-area bucket."""
        try:
            fig, ax = plt.subplots(figsize=(8, 4.5))
            sns.pointplot(data=stratified, x='bucket', y='mean', hue='model', ax=ax)
            ax.set_ylim(0, 1)
            ax.set_xlabel('Lesion area per slice (mm²)', fontweight='bold')
            ax.set_ylabel('Mean DICE', fontweight='bold')
            ax.set_title('DICE vs lesion size', fontsize=12, fontweight='bold')
            plt.tight_layout()

            output_path = self.output_dir / "dice_vs_lesion_area.png"
            plt.savefig(output_path, bbox_inches='tight')
            plt.close(fig)
            return str(output_path)
        except Exception as e:
            logger.error(f"Error creating stratified DICE chart: {e}")
            plt.close('all')
            return None
