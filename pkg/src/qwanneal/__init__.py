"""Annealing a matrix-product wavefunction to find Ising spin-glass ground states."""

__version__ = "0.1.0"
