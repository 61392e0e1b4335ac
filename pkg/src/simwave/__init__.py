"""Stacked-intelligent-metasurface downlink beamforming under statistical CSI."""

__version__ = "0.1.0"
