"""Numerical laboratory for skew Killing spinors on 4-dimensional manifolds."""

__version__ = "0.1.0"
