"""Adaptive feature selection with binary masking."""
__version__ = "0.1.0"
