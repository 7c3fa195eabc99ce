"""Numerical tools for the geometry of zero sets of harmonic polynomials."""

__version__ = "0.1.0"
