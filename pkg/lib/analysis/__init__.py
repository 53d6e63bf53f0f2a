#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Analysis Package

Anomaly segmentation, evaluation analyzers, strategy comparison, report
generation and the experiment orchestrator.

MIT License
See LICENSE file for full license text.
"""

from .base_analyzer import BaseAnalyzer, MultiAnalyzer, EvaluationData
from .segmentation import (
    residual,
    erode_mask,
    label_components,
    postprocess,
    segment_slice,
    segment_dataset,
    save_segmentations,
)
from .evaluation_analyzer import (
    SegmentationAnalyzer,
    ReconstructionAnalyzer,
    DisentanglementAnalyzer,
    MetricsReport,
    export_embeddings,
    save_embeddings,
    summarize_models,
)
from .comparison import compare_strategies
from .report_generator import ReportGenerator
from .orchestrator import ExperimentOrchestrator, run_experiment

__all__ = [
    # Base classes
    "BaseAnalyzer",
    "MultiAnalyzer",
    "EvaluationData",

    # Segmentation
    "residual",
    "erode_mask",
    "label_components",
    "postprocess",
    "segment_slice",
    "segment_dataset",
    "save_segmentations",

    # Evaluation
    "SegmentationAnalyzer",
    "ReconstructionAnalyzer",
    "DisentanglementAnalyzer",
    "MetricsReport",
    "export_embeddings",
    "save_embeddings",
    "summarize_models",
    "compare_strategies",
    "ReportGenerator",

    # Orchestrator
    "ExperimentOrchestrator",
    "run_experiment",
]
