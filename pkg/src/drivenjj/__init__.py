"""Simulation and analysis toolkit for a driven, weakly dissipative Josephson oscillator."""

__version__ = "0.1.0"
