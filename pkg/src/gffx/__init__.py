"""Simulation and statistical verification of the extremal process of the 2D discrete Gaussian free field."""

from .constants import ALPHA, G, TWO_SQRT_G
from .reports import TestReport

__version__ = "0.1.0"

__all__ = ["ALPHA", "G", "TWO_SQRT_G", "TestReport", "__version__"]
