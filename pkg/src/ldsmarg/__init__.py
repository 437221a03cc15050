"""Marginal densities from Korobov lattice evaluations."""
__version__ = "0.1.0"
