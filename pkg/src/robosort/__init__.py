"""Rhythmic traffic control, throughput estimation and layout design for robotic sorting grids."""
__version__ = "0.1.0"
