"""Seeded round-based simulator of LEACH and R-LEACH cluster-head election."""

__version__ = "0.1.0"
