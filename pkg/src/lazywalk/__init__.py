"""Lazy three-state quantum walk with dephasing and its continuum limit."""

__version__ = "0.1.0"
