"""Evolved versus optimized network topologies under node expansion."""

__version__ = "0.1.0"
