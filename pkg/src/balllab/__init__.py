"""Exact and numerical toolkit for Bergman-type operators, Riesz capacities and
multipliers of Hardy-Sobolev spaces on the unit ball of C^n."""

from .poly import Polynomial, random_polynomial
from .spectral import bergman_operator, inverse_operator, rkt_operator, radial_operator

__all__ = ["Polynomial", "random_polynomial", "bergman_operator", "inverse_operator", "rkt_operator",
           "radial_operator"]
__version__ = "0.1.0"
