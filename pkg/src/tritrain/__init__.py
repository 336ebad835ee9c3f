"""Tri-training for dependency parsing."""
__version__ = "0.1.0"
