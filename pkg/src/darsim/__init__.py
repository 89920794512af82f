"""Threshold-element resonance simulator and in-silico contrast-detection harness."""

__version__ = "0.1.0"
