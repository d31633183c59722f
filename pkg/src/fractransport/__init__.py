"""Pseudo-spectral simulation and weighted harmonic-analysis checks for 1D nonlocal transport."""

__version__ = "0.1.0"
