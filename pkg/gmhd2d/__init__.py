"""Pseudo-spectral experiments for 2D generalized MHD with fractional dissipation."""

__version__ = "0.1.0"
