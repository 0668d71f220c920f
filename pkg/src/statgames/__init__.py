"""Equilibria of two-player statistical guessing games."""

__version__ = "0.1.0"
