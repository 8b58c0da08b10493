"""Commuting differential operators, spectral curves and monodromy probes."""

__version__ = "0.1.0"
