"""Exception types shared across the package."""

import numpy as np


class HurstDomainError(ValueError):
    """A Hurst value (or other scalar parameter) lies outside its admissible range."""


class GridError(ValueError):
    """Grid mismatch, non-node evaluation point or insufficient resolution."""


class DivergenceError(ArithmeticError):
    """A solver produced non-finite or exploding states."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FactorizationError(np.linalg.LinAlgError):
    """Covariance matrix could not be factorized."""
