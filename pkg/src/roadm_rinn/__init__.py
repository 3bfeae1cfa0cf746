"""Simulation and multi-failure localization for multi-fiber ROADM networks."""

__version__ = "0.1.0"
