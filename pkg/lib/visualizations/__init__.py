#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Visualizations Package

Report figures.

MIT License
See LICENSE file for full license text.
"""

from .results_visualizer import ResultsVisualizer

__all__ = ["ResultsVisualizer"]
