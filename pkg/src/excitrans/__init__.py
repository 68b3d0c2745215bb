"""Screening and classification of efficient coherent-transport geometries."""

__version__ = "0.1.0"
