"""Acoustic panel measurement processing, measurement planning and panel generation."""

from .errors import (DegenerateReferenceError, DependencyError, EchoPanelError, FormatError,
                     ParameterError, SymmetryUnavailableError)
from .kernels import BACKEND
from .signals import Environment, Signal

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DegenerateReferenceError", "DependencyError", "EchoPanelError", "Environment",
    "FormatError", "ParameterError", "Signal", "SymmetryUnavailableError", "__version__",
]
