"""Exact A-infinity deformations of polynomial bimodules and quantum superalgebras."""

__version__ = "0.1.0"
