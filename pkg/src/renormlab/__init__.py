"""Numerical renormalization toolkit for infinitely renormalizable unimodal maps."""

from .errors import (
    CombinatorialMismatch,
    DepthInsufficient,
    InvalidParameter,
    InvariantViolation,
    NumericalError,
    RenormLabError,
)
from .maps import Family, MapSpec, make_map
from .numerics import Interval, Jet3

__version__ = "0.1.0"

__all__ = [
    "CombinatorialMismatch",
    "DepthInsufficient",
    "Family",
    "Interval",
    "InvalidParameter",
    "InvariantViolation",
    "Jet3",
    "MapSpec",
    "NumericalError",
    "RenormLabError",
    "__version__",
    "make_map",
]
