"""Cooperative Conjugate Gradient solvers, multithreaded runtime and benchmark harness."""

__version__ = "0.1.0"
