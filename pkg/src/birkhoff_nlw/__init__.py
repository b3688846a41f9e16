"""Birkhoff normal forms for NLW on the torus."""

__version__ = "0.1.0"
