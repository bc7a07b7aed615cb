"""Fuzzy Minimal Complexity Machine classifiers trained by linear programming."""

__version__ = "0.1.0"
