"""Finite element solvers for flexural wave scattering by a periodic array of
clamped cavities in a thin plate, truncated with a perfectly matched layer."""

__version__ = "0.1.0"
