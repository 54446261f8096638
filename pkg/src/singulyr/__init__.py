"""Numerical dynamics near isolated essential singularities."""

from __future__ import annotations

__version__ = "0.1.0"

from .evaluation import EvaluationError, SingularitySetup, evaluate, spherical_derivative
from .expr import ExprError, format_ast, invert_conjugate, parse

__all__ = [
    "EvaluationError", "ExprError", "SingularitySetup", "__version__", "evaluate", "format_ast",
    "invert_conjugate", "parse", "spherical_derivative",
]
