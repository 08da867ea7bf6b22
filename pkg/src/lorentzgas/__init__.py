"""Boltzmann-Grad limit of the two-dimensional periodic Lorentz gas.

Subpackages:
    billiard   -- exact dynamics in Z_r = {x : dist(x, Z^2) > r}
    arithmetic -- continued-fraction / Farey computation of 3-obstacle data
    kernel     -- closed-form limit objects: transfer map, P, Pi, E, mu
    mc         -- Monte-Carlo / Cesaro verification harness
    solver     -- deterministic solver for the limiting kinetic equation
    cli        -- command-line entry point
"""

__version__ = "0.1.0"
