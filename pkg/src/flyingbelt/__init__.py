"""Simulation, modal identification and input-shaper design for a cable-suspended belt."""

__version__ = "0.1.0"
