"""Finite-truncation numerics for modular spectral data on the noncommutative 2-torus."""

__version__ = "0.1.0"
