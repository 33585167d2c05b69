"""Workbench for the derivative nonlinear Schrodinger equation.

Pseudospectral simulation of the equation and its gauge-equivalent forms,
evaluation and monitoring of the conserved-quantity hierarchy, exact-arithmetic
generation of conserved densities by the integrable recurrence, blow-up profile
rescaling and modulation fitting, constrained variational minimization, and a
command-line verification harness built on closed-form oracles.
"""

__version__ = "0.1.0"
