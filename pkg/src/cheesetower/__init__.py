"""Finite-stage Swiss-cheese towers and numerical certificates."""

__version__ = "0.1.0"
