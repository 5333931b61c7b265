"""Plunge-region eigenvalue counts for spatio-spectral limiting on lattices."""

__version__ = "0.1.0"
