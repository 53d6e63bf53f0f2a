#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Exceptions

Error taxonomy shared by all modules. ValueError-family errors are
validation failures (CLI exit code 1); everything else is a runtime
failure (CLI exit code 2).

MIT License
See LICENSE file for full license text.
"""


class FedDisError(Exception):
    """Base class for all FedDis Lab errors."""


class ConfigurationError(FedDisError, ValueError):
    """Invalid configuration value or combination."""


class ShapeError(FedDisError, ValueError):
    """Array dimensions do not match the expected layout."""


class InputError(FedDisError, ValueError):
    """Invalid input to a metric or analysis function."""


class GenerationError(FedDisError, RuntimeError):
    """Phantom or lesion generation could not satisfy its constraints."""


class ProtocolError(FedDisError, RuntimeError):
    """Aggregation preconditions violated (weights, tree structure)."""


class FederationStateError(FedDisError, RuntimeError):
    """Operation not valid for the current federation or run state."""


class UndefinedBaselineError(FedDisError, ZeroDivisionError):
    """Relative improvement requested against a zero baseline."""
