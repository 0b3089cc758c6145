"""Exact multi-trip drone routing with arbitrary energy models."""

__version__ = "0.1.0"
