"""Adaptive optimization driver: certify, enrich, re-optimize.

Each outer iteration spends exactly one full-order state solve and one
full-order adjoint solve to evaluate the error bounds at the current
iterate.  If the upper bound is below the target, the iterate is returned
with a certificate; otherwise the two freshly computed trajectories join
the snapshot set, POD rebuilds the reduced spaces, and a reduced problem is
solved to produce the next iterate, warm-started from the projection of the
current one.  Snapshot sets only grow, so recorded basis sizes are
non-decreasing.

The certificate is exact for the discrete problem: upper <= eps is
equivalent to ||grad J(u)|| <= beta * eps, so the inner solves default to
the gradient tolerance beta * eps to match.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .estimator import estimate, true_error
from .fom import FomSolver
from .optimizer import BbConfig
from .pod import SnapshotSet, compute_pod
from .problem import OcpProblem, Trajectory
from .rom import (
    build_reduced,
    lift_control,
    project_control,
    solve_reduced_ocp_full,
    solve_reduced_ocp_state_only,
)

_RANK_MODES = ("energy", "max")


class MaxOuterExceeded(Exception):
    """Raised only by callers that insist on convergence; the driver itself
    returns converged=False instead of raising."""


@dataclass
class AdaptiveConfig:
    """Outer-loop parameters.

    tolerance is the target for the certified upper bound.  rank_mode
    "energy" truncates POD at energy_tol, "max" keeps the full numerical
    rank.  inner defaults to a BB configuration with gradient tolerance
    beta * tolerance and initial step 1/beta.
    """

    tolerance: float
    max_outer: int = 50
    energy_tol: float = 1e-12
    rank_mode: str = "energy"
    drop_tol: float = 1e-10
    inner: BbConfig | None = None
    record_history: bool = True

    def __post_init__(self):
        if self.tolerance < 0.0:
            raise ValueError(f"tolerance must be nonnegative, got {self.tolerance}")
        if self.max_outer < 1:
            raise ValueError(f"max_outer must be positive, got {self.max_outer}")
        if self.rank_mode not in _RANK_MODES:
            raise ValueError(f"rank_mode must be one of {_RANK_MODES}")


@dataclass
class HistoryRow:
    """Per-outer-iteration record."""

    k: int
    grad_norm: float
    lower: float
    upper: float
    r: int
    r_u: int
    inner_iters: int
    wall_ms: float
    true_error: float | None = None


@dataclass
class AdaptiveHistory:
    rows: list[HistoryRow] = field(default_factory=list)

    COLUMNS = (
        "k",
        "grad_norm",
        "lower",
        "upper",
        "r",
        "r_u",
        "inner_iters",
        "wall_ms",
        "true_error",
    )

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [getattr(row, name) for row in self.rows]


def run_adaptive(
    prob: OcpProblem,
    u0: Trajectory,
    cfg: AdaptiveConfig,
    u_ref: Trajectory | None = None,
    solver: FomSolver | None = None,
) -> tuple[Trajectory, AdaptiveHistory, bool]:
    """Adaptive loop with both state and control spaces reduced."""
    return _run(prob, u0, cfg, "full", u_ref, solver)


def run_adaptive_state_only(
    prob: OcpProblem,
    u0: Trajectory,
    cfg: AdaptiveConfig,
    u_ref: Trajectory | None = None,
    solver: FomSolver | None = None,
) -> tuple[Trajectory, AdaptiveHistory, bool]:
    """Adaptive loop with state reduction only (full control space)."""
    return _run(prob, u0, cfg, "state_only", u_ref, solver)


def _run(prob, u0, cfg, variant, u_ref, solver):
    solver = solver if solver is not None else FomSolver(prob)
    inner_cfg = cfg.inner or BbConfig(
        tol=prob.beta * cfg.tolerance,
        initial_step=min(max(1.0 / prob.beta, 1e-12), 1e12),
    )
    energy_tol = 0.0 if cfg.rank_mode == "max" else cfg.energy_tol
    snapshots = SnapshotSet()
    history = AdaptiveHistory()
    u = u0
    r = r_u = 0
    converged = False

    for k in range(cfg.max_outer):
        tic = time.perf_counter()
        bounds, y, p = estimate(prob, u, solver=solver)
        err = (
            true_error(u, u_ref, prob.space.m_u, prob.grid)
            if u_ref is not None
            else None
        )
        if bounds.upper <= cfg.tolerance:
            converged = True
            if cfg.record_history:
                history.rows.append(
                    HistoryRow(
                        k,
                        bounds.grad_norm,
                        bounds.lower,
                        bounds.upper,
                        r,
                        r_u,
                        0,
                        1e3 * (time.perf_counter() - tic),
                        err,
                    )
                )
            break

        snapshots.add(y, f"state_{k}")
        snapshots.add(p, f"adjoint_{k}")
        basis = compute_pod(snapshots, prob.space.w_h1, prob.grid, energy_tol)
        rm = build_reduced(prob, basis, cfg.drop_tol)
        r, r_u = rm.rank, rm.control_rank

        if variant == "full":
            start = project_control(rm, u)
            u_hat, report = solve_reduced_ocp_full(rm, inner_cfg, start)
            u = lift_control(rm, u_hat)
        else:
            u, report = solve_reduced_ocp_state_only(rm, inner_cfg, u)

        if cfg.record_history:
            history.rows.append(
                HistoryRow(
                    k,
                    bounds.grad_norm,
                    bounds.lower,
                    bounds.upper,
                    r,
                    r_u,
                    report.iterations,
                    1e3 * (time.perf_counter() - tic),
                    err,
                )
            )

    return u, history, converged
