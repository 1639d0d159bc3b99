"""Bilevel polynomial program solver via Jacobian representations,
moment-SOS relaxations and the exchange method."""

from .poly import Polynomial, Signature, Monomial
from .jacobian import LowerLevel, JacobianSystem, build_system
from .bilevel import BilevelProblem, BilevelResult, exchange_solve

__all__ = [
    "Polynomial",
    "Signature",
    "Monomial",
    "LowerLevel",
    "JacobianSystem",
    "build_system",
    "BilevelProblem",
    "BilevelResult",
    "exchange_solve",
]

__version__ = "0.1.0"
