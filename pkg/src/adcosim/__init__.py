"""Desk-scale co-simulation harness for scenario-based ADS testing."""

__version__ = "0.1.0"
