"""The certified adaptive loop: estimate, terminate or enrich, re-optimize."""

import dataclasses

import numpy as np
import pytest

from podopt import (
    AdaptiveConfig,
    BbConfig,
    FomSolver,
    Trajectory,
    run_adaptive,
    run_adaptive_state_only,
)
from podopt.problem import model_problem


def zero_start(prob):
    return Trajectory.zeros(prob.grid, prob.control_dim)


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(tolerance=-1.0)
    with pytest.raises(ValueError):
        AdaptiveConfig(tolerance=1e-6, max_outer=0)
    with pytest.raises(ValueError):
        AdaptiveConfig(tolerance=1e-6, rank_mode="greedy")
    AdaptiveConfig(tolerance=0.0)  # zero target is allowed


# ---------------------------------------------------------------- termination


def test_huge_tolerance_returns_start_after_one_estimate(problem_for):
    prob = problem_for(5, 4, 1e-2)
    solver = FomSolver(prob)
    u0 = zero_start(prob)
    u, history, converged = run_adaptive(
        prob, u0, AdaptiveConfig(tolerance=1e6), solver=solver
    )
    assert converged
    assert len(history) == 1
    assert history.rows[0].inner_iters == 0
    assert history.rows[0].r == 0
    assert np.array_equal(u.values, u0.values)
    assert (solver.state_solves, solver.adjoint_solves) == (1, 1)


def test_zero_target_certifies_the_zero_control(problem_for):
    prob = problem_for(5, 4, 1e-2)
    quiet = dataclasses.replace(prob, y_d=Trajectory.zeros(prob.grid, prob.space.dim))
    u, history, converged = run_adaptive(
        quiet, zero_start(quiet), AdaptiveConfig(tolerance=1e-12)
    )
    assert converged
    assert len(history) == 1
    assert history.rows[0].upper == 0.0
    assert history.rows[0].grad_norm == 0.0
    assert np.abs(u.values).max() == 0.0


def test_certificate_holds_on_convergence(problem_for):
    prob = problem_for(9, 8, 1e-2)
    eps = 1e-6
    cfg = AdaptiveConfig(tolerance=eps)
    solver = FomSolver(prob)
    u, history, converged = run_adaptive(prob, zero_start(prob), cfg, solver=solver)
    assert converged
    final = history.rows[-1]
    assert final.upper <= eps
    assert final.grad_norm <= prob.beta * eps
    # one full-order state and adjoint solve per outer iteration, none hidden
    assert solver.state_solves == len(history)
    assert solver.adjoint_solves == len(history)


def test_non_convergence_reported_not_raised(problem_for):
    prob = problem_for(9, 8, 1e-2)
    cfg = AdaptiveConfig(tolerance=1e-13, max_outer=1)
    u, history, converged = run_adaptive(prob, zero_start(prob), cfg)
    assert not converged
    assert len(history) == 1
    assert history.rows[0].inner_iters > 0


def test_history_can_be_disabled(problem_for):
    prob = problem_for(5, 4, 1e-2)
    cfg = AdaptiveConfig(tolerance=1e-5, record_history=False)
    _, history, converged = run_adaptive(prob, zero_start(prob), cfg)
    assert converged
    assert len(history) == 0


def test_inner_override_is_honored(problem_for):
    prob = problem_for(5, 4, 1e-2)
    inner = BbConfig(tol=1e-7, max_iters=3, initial_step=1.0 / prob.beta)
    cfg = AdaptiveConfig(tolerance=1e-5, max_outer=4, inner=inner)
    _, history, _ = run_adaptive(prob, zero_start(prob), cfg)
    assert all(row.inner_iters <= 3 for row in history.rows)


# ---------------------------------------------------------------- history


def test_history_row_bookkeeping(problem_for):
    prob = problem_for(9, 8, 1e-2)
    cfg = AdaptiveConfig(tolerance=1e-6)
    _, history, converged = run_adaptive(prob, zero_start(prob), cfg)
    assert converged
    ks = history.column("k")
    assert ks == list(range(len(history)))
    rs = history.column("r")
    assert all(b >= a for a, b in zip(rs, rs[1:])), "basis sizes must not shrink"
    assert all(row.r_u <= row.r for row in history.rows if row.r > 0)
    assert all(row.wall_ms >= 0.0 for row in history.rows)
    uppers = history.column("upper")
    assert uppers[-1] <= uppers[0]
    lowers = history.column("lower")
    assert all(lo <= up for lo, up in zip(lowers, uppers))
    assert history.column("true_error") == [None] * len(history)


def test_reference_control_tracks_true_error(problem_for, kkt_for):
    """Given the exact minimizer, every recorded iterate is sandwiched."""
    beta = 1e-1
    prob = problem_for(5, 4, beta)
    u_bar = kkt_for(5, 4, beta)
    cfg = AdaptiveConfig(tolerance=1e-7)
    u, history, converged = run_adaptive(
        prob, zero_start(prob), cfg, u_ref=u_bar
    )
    assert converged
    for row in history.rows:
        assert row.true_error is not None
        assert row.lower <= row.true_error + 1e-12
        assert row.true_error <= row.upper + 1e-12


def test_runs_are_deterministic(problem_for):
    prob = problem_for(9, 6, 1e-2)
    cfg = AdaptiveConfig(tolerance=1e-6)
    u1, h1, c1 = run_adaptive(prob, zero_start(prob), cfg)
    u2, h2, c2 = run_adaptive(prob, zero_start(prob), cfg)
    assert c1 == c2
    assert np.array_equal(u1.values, u2.values)
    for name in ("k", "grad_norm", "lower", "upper", "r", "r_u", "inner_iters"):
        assert h1.column(name) == h2.column(name)


# ---------------------------------------------------------------- variants


@pytest.fixture(scope="module")
def matched_runs():
    """One matched pair of adaptive runs at moderate scale, shared by the
    agreement and wall-time tests."""
    beta = 1e-2
    prob = model_problem(33, 50, beta)
    eps = 1e-8 / beta
    cfg = AdaptiveConfig(tolerance=eps)
    u0 = Trajectory.zeros(prob.grid, prob.control_dim)
    full = run_adaptive(prob, u0, cfg)
    state = run_adaptive_state_only(prob, u0, cfg)
    return prob, eps, full, state


def test_moderate_scale_converges_quickly(matched_runs):
    prob, eps, (u, history, converged), _ = matched_runs
    assert converged
    assert len(history) <= 6
    assert history.rows[-1].upper <= eps
    assert history.rows[-1].grad_norm <= prob.beta * eps


def test_state_only_variant_carries_the_same_certificate(matched_runs):
    prob, eps, _, (u, history, converged) = matched_runs
    assert converged
    assert history.rows[-1].upper <= eps
    rs = history.column("r")
    assert all(b >= a for a, b in zip(rs, rs[1:]))


def test_variant_controls_agree(matched_runs):
    prob, _, (u_full, _, _), (u_state, _, _) = matched_runs
    mu = prob.space.m_u.mat
    diff = u_full.values - u_state.values
    err = np.sqrt(prob.grid.dt * float(np.sum(diff * (mu @ diff.T).T)))
    assert err <= 1e-6


def test_full_reduction_is_not_slower(matched_runs):
    _, _, (_, h_full, _), (_, h_state, _) = matched_runs
    assert sum(h_full.column("wall_ms")) <= sum(h_state.column("wall_ms"))
