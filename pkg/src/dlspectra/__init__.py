"""Spectral computations for Diestel-Leader graphs DL(q, r) and lamplighter groups."""

__version__ = "0.1.0"
