"""Equilibrium measures on the unit sphere under axially symmetric external fields.

The package computes supports (spherical caps), densities, and Robin
constants for the weighted equilibrium problem with the Newtonian kernel,
and ships two independent discretization oracles for cross-validation.
"""

__version__ = "0.1.0"
