"""Numerical toolkit for smooth projective planes and their classical models."""

__version__ = "0.1.0"
