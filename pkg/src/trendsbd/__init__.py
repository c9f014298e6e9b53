"""Trend-line shared bottleneck detection toolkit."""

__version__ = "0.1.0"
