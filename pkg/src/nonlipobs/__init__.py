"""Observers for triangular systems with non-Lipschitz nonlinearities."""

__version__ = "0.1.0"
