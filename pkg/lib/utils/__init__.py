#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Utils Package

Metric calculations, formatting, config validation and seed derivation.

MIT License
See LICENSE file for full license text.
"""

from .calculations import EvaluationMetrics
from .formatters import DataFormatter
from .config_validator import ConfigValidator, load_validated_config
from .seeding import derive_seed, make_rng

__all__ = [
    "EvaluationMetrics",
    "DataFormatter",
    "ConfigValidator",
    "load_validated_config",
    "derive_seed",
    "make_rng",
]
