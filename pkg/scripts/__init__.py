"""Benchmark pipeline and results store maintenance scripts."""
