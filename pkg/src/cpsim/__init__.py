"""Distances between time series through their structural breaks."""

__version__ = "0.1.0"
