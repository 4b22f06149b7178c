"""Mixture-of-experts stock prediction and ranking harness."""

__version__ = "0.1.0"
