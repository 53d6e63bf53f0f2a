#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Experiment Orchestrator

Coordinates the pipeline stages data -> train -> segment -> evaluate ->
report for one experiment config. Every stage persists its artifacts and is
recorded in the run manifest, so an interrupted run resumes where it left
off and a completed run is a no-op.

MIT License
See LICENSE file for full license text.
"""

import logging
import pandas as pd
from pathlib import Path
from typing import Dict, List, Optional
from datetime import datetime

from ..data.phantom_generator import build_site_datasets
from ..models import RunManifest
from ..models.config import ExperimentConfig
from ..network.params import ModelParams
from ..services.checkpoint_service import CheckpointService
from ..services.dataset_store import DatasetStore, SiteDatasets
from ..services.manifest_service import STAGES, ManifestService
from ..training.federation import FederationRunner, FederationState
from ..visualizations.results_visualizer import ResultsVisualizer
from .base_analyzer import EvaluationData
from .evaluation_analyzer import (
    DisentanglementAnalyzer,
    MetricsReport,
    ReconstructionAnalyzer,
    SegmentationAnalyzer,
    FLOAT_FORMAT,
    save_embeddings,
)
from .report_generator import ReportGenerator
from .segmentation import save_segmentations

LOSS_COLUMNS = ["round", "client", "L_Rec", "SCL", "LOL", "total"]


def label_dirname(label: str) -> str:
    """Filesystem-safe directory name for a model label."""
    return label.replace("/", "__")


class ExperimentOrchestrator:
    """
    Runs and resumes the stages of one experiment.

    Artifacts live under the config's output directory:
    data/, train/, segment/, evaluate/, report/ and manifest.json.
    """

    def __init__(self, config: ExperimentConfig, resume: bool = True) -> None:
        """Initialize orchestrator for a validated config."""
        self.config = config
        self.run_dir = Path(config.output_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.resume = resume

        self.manifests = ManifestService(str(self.run_dir))
        self.store = DatasetStore(str(self.run_dir / "data"))
        self.checkpoints = CheckpointService(str(self.run_dir / "train" / "checkpoints"))
        self.manifest: Optional[RunManifest] = None

        self._datasets: Optional[SiteDatasets] = None
        self._state: Optional[FederationState] = None

        logging.info(f"ExperimentOrchestrator initialized for {config.name} in {self.run_dir}")

    def open(self) -> RunManifest:
        """Open (or resume) the run manifest and snapshot the config."""
        if self.manifest is None:
            self.manifest = self.manifests.open_run(
                self.config.config_hash(), self.config.data_hash(), resume=self.resume
            )
            self.config.save(self.run_dir / "config.json")
        return self.manifest

    def _skip(self, stage: str) -> bool:
        if self.manifest.is_complete(stage):
            logging.info(f"Stage {stage} already complete, skipping")
            return True
        # everything downstream of a stage that runs must run again
        self.manifests.invalidate_from(self.manifest, stage)
        return False

    # ------------------------------------------------------------------ data

    def run_data_stage(self) -> SiteDatasets:
        """Generate and persist the site datasets, or load them."""
        self.open()
        if not self._skip("data"):
            store_hash = self.store.load_manifest().get("data_hash") if self.store.exists() else None
            if store_hash != self.config.data_hash():
                logging.info("Generating phantom datasets...")
                datasets = build_site_datasets(self.config.data, self.config.seed)
                artifacts = self.store.save(datasets, self.config.data, self.config.data_hash())
            else:
                logging.info("Reusing persisted datasets with matching data hash")
                artifacts = [self.store.manifest_file]
            self.manifests.mark_complete(self.manifest, "data", artifacts)
        if self._datasets is None:
            self._datasets = self.store.load()
        return self._datasets

    def evaluation_data(self) -> EvaluationData:
        return EvaluationData(datasets=self.run_data_stage(), roles=self.store.roles())

    # ----------------------------------------------------------------- train

    def _on_round_end(self, state: FederationState) -> None:
        every = self.config.federation.checkpoint_every
        if every and state.rounds_completed % every == 0:
            self.checkpoints.save_state(state, f"round_{state.rounds_completed:04d}")
            self.checkpoints.save_state(state, "latest")

    def run_train_stage(self) -> FederationState:
        """Run the federation (resuming from the latest checkpoint if present)."""
        data = self.evaluation_data()
        if not self._skip("train"):
            runner = FederationRunner(self.config.federation, self.config.arch, self._on_round_end)
            state = None
            if self.resume and self.checkpoints.has_state("latest"):
                state = self.checkpoints.load_state("latest")
                logging.info(f"Resuming training after round {state.rounds_completed}")
            start_time = datetime.now()
            state = runner.run(data.clients(), state)
            duration = (datetime.now() - start_time).total_seconds()
            logging.info(f"Training finished in {duration:.1f} seconds")

            artifacts = self.checkpoints.save_state(state, "final")
            artifacts += self._save_history(state)
            self.manifests.mark_complete(self.manifest, "train", artifacts)
            self._state = state
        if self._state is None:
            self._state = self.checkpoints.load_state("final")
        return self._state

    def _save_history(self, state: FederationState) -> List[Path]:
        train_dir = self.run_dir / "train"
        rounds_file = train_dir / "rounds.csv"
        losses_file = train_dir / "round_losses.csv"
        pd.DataFrame(
            [r.to_dict() for r in state.history],
            columns=["round", "mean_client_loss", "val_rec_loss", "wall_clock", "checksum"],
        ).to_csv(rounds_file, index=False, float_format=FLOAT_FORMAT)
        rows = [
            {"round": r.round_index, "client": cid, "L_Rec": t.get("rec"), "SCL": t.get("scl"),
             "LOL": t.get("lol"), "total": t.get("total")}
            for r in state.history for cid, t in sorted(r.client_losses.items())
        ]
        pd.DataFrame(rows, columns=LOSS_COLUMNS).to_csv(losses_file, index=False, float_format=FLOAT_FORMAT)
        return [rounds_file, losses_file]

    def models(self) -> Dict[str, ModelParams]:
        """Evaluation models keyed by label."""
        return self.run_train_stage().models()

    # --------------------------------------------------------------- segment

    def run_segment_stage(self) -> pd.DataFrame:
        """Segment every lesioned test set and score per-slice DICE."""
        models = self.models()
        data = self.evaluation_data()
        segment_dir = self.run_dir / "segment"
        dice_file = segment_dir / "dice_scores.csv"
        if not self._skip("segment"):
            analyzer = SegmentationAnalyzer(
                models, data, self.config.metrics, postprocess=self.config.postprocess
            )
            results = analyzer.analyze_all()
            artifacts = []
            for (label, dataset), masks in sorted(analyzer.segmentations.items()):
                artifacts.append(save_segmentations(masks, segment_dir / label_dirname(label) / dataset))
            segment_dir.mkdir(parents=True, exist_ok=True)
            results["dice_scores"].to_csv(dice_file, index=False, float_format=FLOAT_FORMAT)
            artifacts.append(dice_file)
            self.manifests.mark_complete(self.manifest, "segment", artifacts)
        return pd.read_csv(dice_file)

    # -------------------------------------------------------------- evaluate

    def run_evaluate_stage(self) -> MetricsReport:
        """SSIM, SAS/SCS and the MetricsReport for this run."""
        dice_scores = self.run_segment_stage()
        eval_dir = self.run_dir / "evaluate"
        if not self._skip("evaluate"):
            models = self.models()
            data = self.evaluation_data()
            reconstruction = ReconstructionAnalyzer(models, data, self.config.metrics).analyze()
            disentangler = DisentanglementAnalyzer(
                models, data, self.config.metrics,
                gamma_range=self.config.federation.gamma_range, seed=self.config.seed,
            )
            disentanglement = disentangler.analyze()

            eval_dir.mkdir(parents=True, exist_ok=True)
            artifacts = [eval_dir / "reconstruction.csv", eval_dir / "disentanglement.csv"]
            reconstruction.to_csv(artifacts[0], index=False, float_format=FLOAT_FORMAT)
            disentanglement.to_csv(artifacts[1], index=False, float_format=FLOAT_FORMAT)
            for label, records in sorted(disentangler.records.items()):
                if records:
                    artifacts.append(save_embeddings(records, eval_dir / "embeddings" / f"{label_dirname(label)}.csv"))

            report = self._build_report(dice_scores, reconstruction, disentanglement)
            artifacts += report.save(eval_dir)
            self.manifests.mark_complete(self.manifest, "evaluate", artifacts)
            return report
        return self._build_report(
            dice_scores,
            pd.read_csv(eval_dir / "reconstruction.csv"),
            pd.read_csv(eval_dir / "disentanglement.csv"),
        )

    def _build_report(self, dice_scores, reconstruction, disentanglement) -> MetricsReport:
        metrics = self.config.metrics
        return MetricsReport.build(
            dice_scores, reconstruction, disentanglement,
            metrics.area_buckets_mm2, baseline=metrics.baseline, significance=metrics.significance,
        )

    # ---------------------------------------------------------------- report

    def run_report_stage(self) -> Path:
        """Write report/metrics.csv, report/report.md and report/visuals."""
        report = self.run_evaluate_stage()
        report_dir = self.run_dir / "report"
        report_file = report_dir / "report.md"
        if not self._skip("report"):
            artifacts = report.save(report_dir)
            rounds = pd.read_csv(self.run_dir / "train" / "rounds.csv")
            dice_scores = pd.read_csv(self.run_dir / "segment" / "dice_scores.csv")
            visualizer = ResultsVisualizer(str(report_dir / "visuals"))
            viz_paths = visualizer.create_all_visualizations({
                "rounds": rounds,
                "summary": report.summary,
                "dice_scores": dice_scores,
                "stratified_dice": report.stratified,
            })
            generator = ReportGenerator(str(report_dir))
            content = generator.generate_report(
                report, self.config, rounds, viz_paths, self.config.metrics.significance
            )
            artifacts.append(Path(generator.save_report(content)))
            artifacts += [Path(p) for p in viz_paths]
            self.manifests.mark_complete(self.manifest, "report", artifacts)
        return report_file

    def run_experiment(self) -> RunManifest:
        """Run (or resume) every stage."""
        start_time = datetime.now()
        self.run_report_stage()
        duration = (datetime.now() - start_time).total_seconds()
        logging.info(f"Experiment {self.config.name} complete in {duration:.1f} seconds")
        logging.info(f"Stages: {self.manifests.summary(self.manifest)}")
        return self.manifest


def run_experiment(config: ExperimentConfig, resume: bool = True) -> RunManifest:
    """Run the whole pipeline for one config."""
    return ExperimentOrchestrator(config, resume=resume).run_experiment()
