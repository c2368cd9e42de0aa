"""Hybrid zeroth-order optimization on embedded spheres and tori."""

__version__ = "0.1.0"
