"""A posteriori error bounds for approximate optimal controls.

For a strongly convex quadratic reduced cost the distance of any control u~
to the exact minimizer is sandwiched by the gradient norm:

    ||grad J(u~)|| / (beta + ||CS||^2)  <=  ||u~ - u*||  <=  ||grad J(u~)|| / beta.

The upper constant is the inverse of the convexity modulus beta, the lower
one inverts an upper bound beta + ||CS||^2 on the Hessian norm, with
||CS|| the control-to-observation solution-operator norm (bounded by the
coercivity constant, = 1 for the model problem).  Evaluating the bounds for
a reduced iterate costs exactly one full-order state solve plus one adjoint
solve, and those two trajectories are returned so the adaptive loop can
recycle them as snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fom import FomSolver
from .problem import OcpProblem, Trajectory, space_time_norm
from .rom import ReducedModel, reduced_cost, solve_reduced_state


@dataclass(frozen=True)
class ErrorBounds:
    """Gradient norm with the induced lower/upper error bounds."""

    grad_norm: float
    lower: float
    upper: float
    true_error: float | None = None


def estimate(
    prob: OcpProblem,
    u_tilde: Trajectory,
    solver: FomSolver | None = None,
) -> tuple[ErrorBounds, Trajectory, Trajectory]:
    """Certified bounds on the distance of u_tilde to the exact minimizer.

    Returns (bounds, state, adjoint); passing a shared solver reuses its
    cached factorizations and keeps its solve counters accurate.
    """
    solver = solver if solver is not None else FomSolver(prob)
    grad, y, p = solver.gradient(u_tilde)
    gnorm = space_time_norm(grad, prob.space.m_u, prob.grid)
    c_lower = 1.0 / (prob.beta + prob.cs_norm_bound**2)
    bounds = ErrorBounds(
        grad_norm=gnorm,
        lower=c_lower * gnorm,
        upper=gnorm / prob.beta,
    )
    return bounds, y, p


def true_error(u: Trajectory, u_ref: Trajectory, m_u, grid) -> float:
    """Space-time control distance ||u - u_ref||."""
    return space_time_norm(u - u_ref, m_u, grid)


def optimal_value_gap(
    prob: OcpProblem,
    u_fom: Trajectory,
    rm: ReducedModel,
    u_red: Trajectory,
    solver: FomSolver | None = None,
) -> float:
    """Signed gap J(u_fom) - J_reduced(u_red) between optimal values."""
    solver = solver if solver is not None else FomSolver(prob)
    y = solver.solve_state(u_fom)
    full_value = solver.cost(u_fom, y)
    y_hat = solve_reduced_state(rm, u_red)
    reduced_value = reduced_cost(rm, u_red, y_hat)
    return full_value - reduced_value
