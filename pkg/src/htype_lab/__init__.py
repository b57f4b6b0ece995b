"""Truncated Hilbertian H-type groups with weak graded metrics."""

__version__ = "0.1.0"
