"""Exact computer algebra for the D4 Drinfeld–Sokolov and double-ramification hierarchies."""

__version__ = "0.1.0"
