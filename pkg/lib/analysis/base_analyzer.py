#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Base Analyzer

Abstract base class providing common evaluation functionality for the
analyzers that score trained models on the site datasets.

MIT License
See LICENSE file for full license text.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
import logging
import pandas as pd
from typing import Dict, List, Optional, Tuple

from ..models import ClientDataset, ScanSlice
from ..models.config import MetricsConfig
from ..network.params import ModelParams
from ..utils.calculations import EvaluationMetrics


@dataclass
class EvaluationData:
    """Site datasets with their roles.

    Client sites were trained on; unseen sites are only ever evaluated.
    """

    datasets: Dict[str, Tuple[ClientDataset, ClientDataset]]
    roles: Dict[str, str] = field(default_factory=dict)

    def role(self, site_id: str) -> str:
        return self.roles.get(site_id, "client")

    def site_ids(self, role: Optional[str] = None) -> List[str]:
        return sorted(s for s in self.datasets if role is None or self.role(s) == role)

    def lesioned_tests(self) -> Dict[str, List[ScanSlice]]:
        """Lesioned test set per site, keyed by site id."""
        return {s: self.datasets[s][1].test for s in self.site_ids() if self.datasets[s][1].test}

    def healthy_tests(self, role: str) -> List[ScanSlice]:
        return [scan for s in self.site_ids(role) for scan in self.datasets[s][0].test]

    def clients(self) -> List[ClientDataset]:
        """Healthy datasets of the client sites (the training federation)."""
        return [self.datasets[s][0] for s in self.site_ids("client")]


class BaseAnalyzer(ABC):
    """
    Abstract base class for all evaluation analyzers.

    Provides common functionality and enforces a consistent interface
    across all analyzer implementations.
    """

    def __init__(
        self,
        models: Dict[str, ModelParams],
        data: EvaluationData,
        metrics_config: Optional[MetricsConfig] = None,
    ):
        """Initialize analyzer with labelled models and site datasets."""
        if not models:
            raise ValueError("At least one model is required before creating an analyzer")
        self.models = dict(sorted(models.items()))
        self.data = data
        self.config = metrics_config or MetricsConfig()
        self.calc = EvaluationMetrics()

    @abstractmethod
    def analyze(self) -> pd.DataFrame:
        """
        Perform the core analysis.

        Returns:
            DataFrame with analysis results
        """
        pass

    def get_analysis_name(self) -> str:
        """Return the analysis name for file naming."""
        return self.__class__.__name__.replace('Analyzer', '').lower()

    def log_analysis_summary(self, df: pd.DataFrame, analysis_name: Optional[str] = None) -> None:
        """Log summary of analysis results."""
        name = analysis_name or self.get_analysis_name()
        if df.empty:
            logging.warning(f"{name} analysis returned no results")
            return
        logging.info(f"{name} analysis completed: {len(df)} rows")
        if "dice" in df.columns:
            logging.info(f"  Mean DICE: {df['dice'].mean():.4f}")


class MultiAnalyzer(BaseAnalyzer):
    """
    Base class for analyzers that produce multiple related tables.
    """

    @abstractmethod
    def analyze_all(self) -> Dict[str, pd.DataFrame]:
        """
        Perform all related analyses.

        Returns:
            Dictionary mapping analysis names to DataFrames
        """
        pass

    def analyze(self) -> pd.DataFrame:
        """Default implementation returns the first analysis."""
        results = self.analyze_all()
        if results:
            return list(results.values())[0]
        return pd.DataFrame()
