"""Escape-rate experiments for the exponential family ``lam * exp(z)``."""

__version__ = "0.1.0"
