"""Numerical laboratory for logarithmically regularized 2D Euler equations."""

from .spectral import Field, Gamma, Grid, RegKind

__all__ = ["Field", "Gamma", "Grid", "RegKind"]
__version__ = "0.1.0"
