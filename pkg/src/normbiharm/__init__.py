"""Normalized solutions of ``Lap^2 u + mu Lap u - lambda u = |u|^{p-2} u`` with prescribed mass.

Modules
-------
analytic
    Exponents, thresholds, landscape roots and multiplier bounds.
fiber
    Fiber map along mass-preserving dilations and Pohozaev classification.
radial
    Radial grid, operators, norms and dilations.
solve
    Ground-state, mountain-pass and limit solvers; GN constant estimate.
harness
    Bessel witness, parameter sweeps and decay diagnostics.
cli
    Command-line front end.
"""

__version__ = "0.1.0"

from .analytic import GNConstant, ProblemParams, reference_mass, thresholds  # noqa: E402
from .solve import (  # noqa: E402
    SolverConfig,
    gn_constant_estimate,
    solve_ground,
    solve_limit,
    solve_mountain_pass,
)

__all__ = [
    "GNConstant",
    "ProblemParams",
    "SolverConfig",
    "gn_constant_estimate",
    "reference_mass",
    "solve_ground",
    "solve_limit",
    "solve_mountain_pass",
    "thresholds",
]
