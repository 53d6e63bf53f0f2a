#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Formatters

Number formatting for metric tables and the markdown report.

MIT License
See LICENSE file for full license text.
"""

import logging
from typing import Optional

import pandas as pd


class DataFormatter:
    """Consistent formatting of metric tables across the report outputs."""

    # Decimal places per metric column; "dice_mean" also covers "<site>_dice_mean"
    PRECISION_RULES = {
        "dice_mean": 4,
        "dice_std": 4,
        "mean_dice": 4,
        "ri": 4,
        "ks_statistic": 4,
        "p_value": 4,
        "ssim_test": 4,
        "ssim_healthy": 4,
        "sas": 4,
        "scs": 4,
    }

    @classmethod
    def _precision(cls, column: str) -> Optional[int]:
        if column in cls.PRECISION_RULES:
            return cls.PRECISION_RULES[column]
        for key, decimals in cls.PRECISION_RULES.items():
            if column.endswith(f"_{key}"):
                return decimals
        return None

    @classmethod
    def apply_precision_formatting(cls, df: pd.DataFrame) -> pd.DataFrame:
        """
        Round known metric columns to their display precision.

        Args:
            df: DataFrame to format

        Returns:
            Formatted DataFrame
        """
        if df.empty:
            return df

        df = df.copy()
        for col in df.columns:
            decimals = cls._precision(col)
            if decimals is not None:
                try:
                    df[col] = pd.to_numeric(df[col], errors="coerce").round(decimals)
                except Exception as e:
                    logging.warning(f"Could not format column {col}: {e}")
        return df

    @classmethod
    def format_percentage(cls, value: float, decimals: int = 1) -> str:
        """Format a fraction (0.25) as a percentage (25.0%)."""
        if value is None or pd.isna(value):
            return "N/A"
        return f"{value * 100:.{decimals}f}%"

    @classmethod
    def format_mean_std(cls, mean: float, std: float, decimals: int = 3) -> str:
        """Format as 'mean ± std'."""
        if mean is None or pd.isna(mean):
            return "N/A"
        if std is None or pd.isna(std):
            return f"{mean:.{decimals}f}"
        return f"{mean:.{decimals}f} ± {std:.{decimals}f}"

    @classmethod
    def format_p_value(cls, p_value: float, significance: float = 0.05) -> str:
        """p-value with a star when significant."""
        if p_value is None or pd.isna(p_value):
            return "N/A"
        star = "*" if p_value <= significance else ""
        return f"{p_value:.3g}{star}"

