"""Discrete-time covariance steering.

Thin re-export of the compiled ``_core`` module. Matrices are numpy arrays;
sequences are lists indexed by time step.
"""

from ._core import (
    Controller,
    NewtonReport,
    SdpSolution,
    SimulationResult,
    SteeringError,
    SteeringProblem,
    analytic_cost,
    boundary_matrix,
    check_feasibility,
    controller_from_pi0,
    eval_f,
    eval_jacobian,
    extract_controller,
    simulate,
    solve,
    solve_newton,
    solve_sdp,
    symmetrized,
    validate,
    write_sdpa,
)


def load_problem(path):
    """Read a problem file (see README for the JSON layout)."""
    return SteeringProblem.load(str(path))


__all__ = [name for name in dir() if not name.startswith("_")]
