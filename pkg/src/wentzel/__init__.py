"""Wentzel-Laplace spectra, capacitor decompositions and certified eigenvalue bounds."""

__version__ = "0.1.0"
