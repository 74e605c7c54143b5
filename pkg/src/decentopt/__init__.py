"""Decentralized non-convex optimization simulator."""

__version__ = "0.1.0"
