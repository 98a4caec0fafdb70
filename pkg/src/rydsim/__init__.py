"""Simulation of one-step GHZ preparation and multi-qubit phase gates with Rydberg atoms."""

__version__ = "0.1.0"
