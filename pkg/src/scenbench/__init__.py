"""Scenario-based safety benchmarking for driving policies on a 2D simulator."""

__version__ = "0.1.0"
