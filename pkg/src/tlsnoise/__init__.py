"""Charge-noise spectra from two-level-system dipoles and Bayesian inversion of measured spectra."""

__version__ = "0.1.0"
