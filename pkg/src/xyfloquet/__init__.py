"""Simulation, decoding and exact verification of the x+y Floquet code."""

__version__ = "0.1.0"
