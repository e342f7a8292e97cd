"""Numerical laboratory for the stability of convex spherical caps."""

__version__ = "0.1.0"
