"""Synthetic depth frames, depth normalisations and a small residual depth network."""

__version__ = "0.1.0"
