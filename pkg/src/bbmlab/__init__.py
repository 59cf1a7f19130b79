"""Numerical laboratory for fractional Sobolev seminorms and their s -> 1 limit."""

__version__ = "0.1.0"
