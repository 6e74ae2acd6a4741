"""Numerical laboratory for multi-end solutions of the elliptic sine-Gordon equation."""

__version__ = "0.1.0"
