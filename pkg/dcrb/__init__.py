"""Simulator for randomized benchmarking of dynamic circuit blocks."""
