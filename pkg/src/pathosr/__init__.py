"""Microscopy single-image super-resolution with ROI-aware adversarial critics."""

__version__ = "0.1.0"
