"""Elliptic regularity toolkit for planar corner domains."""

__version__ = "0.1.0"
