"""Piecewise-linear (Regge) geometry on simplicial pseudomanifolds."""
__version__ = "0.1.0"
