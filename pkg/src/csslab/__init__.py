"""Numerical laboratory for the radial self-dual Chern-Simons-Schroedinger flow."""

__version__ = "0.1.0"
