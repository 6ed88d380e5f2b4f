"""Behavioral simulator for dual-mode FeFET analog in-memory-computing macros."""

__version__ = "0.1.0"
