"""Hypothesis checks and desk-scale simulation for weakly coupled effectively damped wave systems."""

__version__ = "0.1.0"
