"""Navier-Stokes solves with prescribed flow rates on boundary sections.

Flow rates are imposed through Lagrange multipliers and the augmented
saddle-point system is solved by GMRES with block SIMPLE-type
preconditioners.
"""

__version__ = "0.1.0"
