"""Coupled-mode simulation of Zeno-controlled wave mixing in a four-mode microring."""

__version__ = "0.1.0"
