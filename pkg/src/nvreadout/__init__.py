"""Simulation and analysis of optically read NV nuclear spins coupled to thermal electron states."""

__version__ = "0.1.0"
