"""Causal domain adaptation by certified separating feature sets."""

__version__ = "0.1.0"
