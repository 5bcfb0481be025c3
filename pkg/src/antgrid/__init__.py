"""Simulator for collaborative treasure search by pheromone-marking ants on the grid."""

__version__ = "0.1.0"
