"""Egocentric free-space mapping and learned exploration on procedural floorplans."""

__version__ = "0.1.0"
