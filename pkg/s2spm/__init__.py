"""Signed Two-Space Proximity Model for signed protein-protein interaction networks."""

__version__ = "0.3.0"
