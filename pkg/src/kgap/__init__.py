"""Involutions f with f^a - f^b = x^a - x^b, their integrals, and three applications.

The applications: probabilities of avoiding long runs of failures, partition
counts without k consecutive part values, and spanning in threshold growth
cellular automata.
"""

from .core_math import ConvergenceError, DomainError, ExponentPair, f_eval, f_value, rho, series_F
from .gap_process import GapParams, lambda_k, p_Ak, sandwich_bounds
from .partitions import count_macmahon, count_pk, count_unrestricted
from .quadrature import integral_main, integral_split, integral_tilde

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "ExponentPair",
    "GapParams",
    "count_macmahon",
    "count_pk",
    "count_unrestricted",
    "f_eval",
    "f_value",
    "integral_main",
    "integral_split",
    "integral_tilde",
    "lambda_k",
    "p_Ak",
    "rho",
    "sandwich_bounds",
    "series_F",
]
