"""Numerical laboratory for biased coin convolutions and their arithmetic."""

from coinsieve.errors import BudgetExceeded, DomainError
from coinsieve.measure import BiasedBitMeasure, TernaryCoeffDist

__version__ = "0.1.0"
SCHEMA_TAG = "coinsieve/v1"

__all__ = [
    "BiasedBitMeasure",
    "BudgetExceeded",
    "DomainError",
    "SCHEMA_TAG",
    "TernaryCoeffDist",
]
