"""Coordinated cyber-attack detection for cyber-physical power systems."""

__version__ = "0.1.0"
