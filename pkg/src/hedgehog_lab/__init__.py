"""Desk-scale numerical laboratory for small-divisor dynamics."""

__version__ = "0.1.0"
