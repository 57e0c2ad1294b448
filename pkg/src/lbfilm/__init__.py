"""Steady states, spectra, and stabilization for a 1D advective Cahn-Hilliard model."""

from .model import Field, Grid, ModelParams

__all__ = ["Field", "Grid", "ModelParams"]
__version__ = "0.1.0"
