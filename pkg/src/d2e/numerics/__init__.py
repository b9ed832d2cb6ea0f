"""Numerical foundation: tape autodiff, counter-based RNG, dense linalgebra."""

from .linalg import cholesky_psd, sample_mvn, solve_lower
from .rng import RngStream
from .tape import Tape, Var

__all__ = [
    "Tape",
    "Var",
    "RngStream",
    "cholesky_psd",
    "solve_lower",
    "sample_mvn",
]
