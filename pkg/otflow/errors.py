"""Typed failures raised by otflow. Each class maps to one CLI exit code."""
from __future__ import annotations

from typing import Optional

EXIT_OK = 0
EXIT_STRICT = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_METRIC = 4
EXIT_STRUCTURE = 5
EXIT_FLOW = 6


class OTFlowError(Exception):
    """Base class for every otflow failure."""

    exit_code = EXIT_STRUCTURE


class ConfigError(OTFlowError, ValueError):
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class MetricError(OTFlowError, ValueError):
    """Metric is not Hermitian, not positive definite, or has the wrong shape."""

    exit_code = EXIT_METRIC


class ParameterError(OTFlowError, ValueError):
    exit_code = EXIT_STRUCTURE


class StructureError(OTFlowError, ValueError):
    """Dimension mismatch between tables, vectors or forms, or a wrong bidegree."""

    exit_code = EXIT_STRUCTURE


class AlgebraValidationError(StructureError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class FlowIntegrationError(OTFlowError, RuntimeError):
    exit_code = EXIT_FLOW
