"""Numerical laboratory for norm inflation in the Novikov equation."""
from .spectral import EPS_SUPP, BandError, Field, Grid

__all__ = ["EPS_SUPP", "BandError", "Field", "Grid"]
__version__ = "0.1.0"
