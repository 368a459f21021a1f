"""Numerical companion for Hardy inequalities with a boundary singularity."""
__version__ = "0.1.0"
