"""Finite element toolkit for a 3D Stokes / 2D clamped-plate interaction.

Submodules: mesh (structured cavity/plate meshes), fem (elements, spaces,
quadrature, assembly), linalg (sparse solves and spectral helpers), stokes
and plate (the two subproblem solvers), coupling (partitioned fixed-point
driver), mixed (monolithic saddle-point formulation and inf-sup estimate),
verification (manufactured solution and convergence studies), cli.
"""

__version__ = "0.1.0"
