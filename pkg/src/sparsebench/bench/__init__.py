"""Benchmark harness and ``bench`` command line."""
