"""Finite-truncation numerical checks for open quantum systems with varying particle number."""

__version__ = "0.1.0"
