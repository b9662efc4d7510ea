"""Trajectory super-resolution: rebuild fine-grained GPS tracks from coarsened ones."""

__version__ = "0.1.0"
