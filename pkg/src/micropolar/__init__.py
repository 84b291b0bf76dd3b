"""Pseudo-spectral laboratory for 2D micropolar Rayleigh-Benard convection
with zero velocity dissipation and fractional temperature dissipation."""

__version__ = "0.1.0"
