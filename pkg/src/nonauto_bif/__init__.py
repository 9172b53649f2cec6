"""Numerical laboratory for bifurcations of scalar nonautonomous ODEs."""

from .errors import (ConfigError, NoConvergence, NonautoBifError, NonFiniteResult,
                     NoTransitionFound, StencilUnderflow, StepFailure, TailDivergence)
from .expr import compile_expr, eval_expr, free_vars, parse_expr, to_source
from .field_model import CoefficientFunction, Family, FieldSpec, eval_rhs, extract_coefficients

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NoConvergence", "NonautoBifError", "NonFiniteResult", "NoTransitionFound",
    "StencilUnderflow", "StepFailure", "TailDivergence",
    "compile_expr", "eval_expr", "free_vars", "parse_expr", "to_source",
    "CoefficientFunction", "Family", "FieldSpec", "eval_rhs", "extract_coefficients",
]
