"""Spinor representation of minimal surfaces with embedded planar ends."""

__version__ = "0.1.0"
