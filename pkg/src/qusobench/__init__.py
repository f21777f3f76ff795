"""Desk-scale benchmark of diagonalized deep QAOA against simulated annealing
on DC power-flow unit commitment."""

__version__ = "0.1.0"
