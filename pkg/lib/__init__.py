#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Library Package

Root package for the federated disentanglement anomaly-segmentation lab.

MIT License
See LICENSE file for full license text.
"""

__version__ = "1.0.0"
