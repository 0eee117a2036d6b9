"""Desk-scale spectral laboratory for the triharmonic operator on oscillating domains."""

__version__ = "0.1.0"
