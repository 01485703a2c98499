"""Kinetic theory toolkit for radiating electrons."""
__version__ = "0.1.0"
