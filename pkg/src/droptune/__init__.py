"""Kernel schedule autotuning: sketch exploration followed by coordinate descent."""

__version__ = "0.1.0"
