"""Simulation and pricing engine for crowdsourced Wi-Fi sharing communities."""

__version__ = "0.1.0"
