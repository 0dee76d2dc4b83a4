"""Reduced-order models: Galerkin state reduction plus an optimality-based
reduction of the control space.

Every POD mode v_i induces the control direction u_i = M_U^{-1} B' v_i,
which is exactly the direction a first-order optimality condition pairs
with v_i; the span of these directions therefore contains the minimizer of
the state-reduced problem, and solving in the reduced control space gives
the *same* optimum as solving over all controls (checked to rounding by the
equivalence tests).  The directions are M_U-orthonormalized, so the reduced
control Gramian is the identity and reduced inner products are Euclidean.

Two solver variants are exposed: ``solve_reduced_ocp_full`` iterates on
reduced control coefficients (independent of the FE dimension), and
``solve_reduced_ocp_state_only`` keeps the control in the full space and
only reduces the state, which is the classical POD-optimization setup the
full variant is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import DimensionMismatch, NotSpd, SpdFactor, gram_schmidt
from .optimizer import BbConfig, BbReport, bb_minimize
from .pod import PodBasis
from .problem import OcpProblem, TimeGrid, Trajectory


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Precomputed reduced operators for one (problem, basis) pair.

    Holds everything the reduced sweeps need: Cholesky factors of the
    per-step matrices M_hat + dt A_hat(t_k), the reduced observation
    normal matrix and target loads, the reduced control basis u_hat with
    its load coupling b_hat, the full-control coupling b_full for the
    state-only variant, and w_lift = M_U^{-1} B' V for lifting reduced
    adjoints into control space.
    """

    prob: OcpProblem
    basis: PodBasis
    u_hat: np.ndarray        # (N_U, r_u), M_U-orthonormal columns
    m_hat: np.ndarray        # (r, r)
    step_factors: tuple      # K Cholesky factors of M_hat + dt A_hat(t_k)
    ct_m_c: np.ndarray       # (r, r)
    g_hat: np.ndarray        # (K, r) reduced target loads
    cost_const: np.ndarray   # (K,) 0.5 ||y_d_k||_H^2
    y0_hat: np.ndarray       # (r,)
    b_hat: np.ndarray        # (r, r_u)
    b_full: np.ndarray       # (r, N_U)
    w_lift: np.ndarray       # (N_U, r)

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def control_rank(self) -> int:
        return self.u_hat.shape[1]

    @property
    def grid(self) -> TimeGrid:
        return self.prob.grid


def build_reduced(
    prob: OcpProblem, basis: PodBasis, drop_tol: float = 1e-10
) -> ReducedModel:
    """Project the problem onto the basis and build the reduced control space."""
    v = basis.modes
    if v.shape[0] != prob.space.dim:
        raise DimensionMismatch("basis does not match the FE space")
    m = prob.space.m_mass.mat
    mu_factor = SpdFactor(prob.space.m_u)

    # Optimality-based control directions, then M_U-orthonormalization.
    raw = mu_factor.solve(prob.b_map.T @ v)
    u_hat = np.column_stack(gram_schmidt(list(raw.T), prob.space.m_u, drop_tol))

    m_hat = v.T @ (m @ v)
    m_hat = 0.5 * (m_hat + m_hat.T)
    a_hats = []
    for comp in prob.op.components:
        a_q = v.T @ (comp.mat @ v)
        a_hats.append(0.5 * (a_q + a_q.T))

    dt = prob.grid.dt
    factors = []
    for t_k in prob.grid.step_times():
        sys = m_hat.copy()
        for a_q, theta in zip(a_hats, prob.op.coefficients):
            sys = sys + (dt * float(theta(t_k))) * a_q
        try:
            factors.append(scipy.linalg.cho_factor(sys))
        except scipy.linalg.LinAlgError as exc:
            raise NotSpd(f"reduced step matrix is not SPD: {exc}") from exc

    cv = (prob.c_map @ v)                     # (N_H, r)
    ct_m_c = cv.T @ (m @ cv)
    ct_m_c = 0.5 * (ct_m_c + ct_m_c.T)
    w_yd = m @ prob.y_d.values.T              # (N_H, K)
    g_hat = (cv.T @ w_yd).T                   # (K, r)
    cost_const = 0.5 * np.sum(prob.y_d.values * w_yd.T, axis=1)

    y0_hat = scipy.linalg.cho_solve(
        scipy.linalg.cho_factor(m_hat), v.T @ (m @ prob.y0)
    )
    b_full = (prob.b_map.T @ v).T             # (r, N_U) dense
    b_hat = b_full @ u_hat
    return ReducedModel(
        prob=prob,
        basis=basis,
        u_hat=u_hat,
        m_hat=m_hat,
        step_factors=tuple(factors),
        ct_m_c=ct_m_c,
        g_hat=g_hat,
        cost_const=np.asarray(cost_const),
        y0_hat=np.asarray(y0_hat),
        b_hat=b_hat,
        b_full=b_full,
        w_lift=raw,
    )


def _reduced_state_sweep(rm: ReducedModel, loads: np.ndarray) -> np.ndarray:
    """Forward sweep: loads[k] is the control contribution dt * B u_k."""
    steps = rm.grid.steps
    out = np.empty((steps, rm.rank))
    y_prev = rm.y0_hat
    for k in range(steps):
        rhs = rm.m_hat @ y_prev + loads[k]
        y_prev = scipy.linalg.cho_solve(rm.step_factors[k], rhs)
        out[k] = y_prev
    return out


def solve_reduced_state(rm: ReducedModel, u_hat: Trajectory) -> Trajectory:
    """Reduced state for a control given in reduced coefficients."""
    if u_hat.dim != rm.control_rank or u_hat.grid != rm.grid:
        raise DimensionMismatch("reduced control does not match the model")
    loads = rm.grid.dt * (u_hat.values @ rm.b_hat.T)
    return Trajectory(_reduced_state_sweep(rm, loads), rm.grid)


def solve_reduced_state_full(rm: ReducedModel, u: Trajectory) -> Trajectory:
    """Reduced state for a control given in the full control space."""
    if u.dim != rm.prob.control_dim or u.grid != rm.grid:
        raise DimensionMismatch("control does not match the model")
    loads = rm.grid.dt * (u.values @ rm.b_full.T)
    return Trajectory(_reduced_state_sweep(rm, loads), rm.grid)


def solve_reduced_adjoint(rm: ReducedModel, y_hat: Trajectory) -> Trajectory:
    """Backward sweep driven by the reduced observation misfit."""
    if y_hat.dim != rm.rank or y_hat.grid != rm.grid:
        raise DimensionMismatch("reduced state does not match the model")
    dt = rm.grid.dt
    steps = rm.grid.steps
    out = np.empty_like(y_hat.values)
    p_next = np.zeros(rm.rank)
    for k in range(steps - 1, -1, -1):
        source = rm.ct_m_c @ y_hat.values[k] - rm.g_hat[k]
        rhs = rm.m_hat @ p_next + dt * source
        p_next = scipy.linalg.cho_solve(rm.step_factors[k], rhs)
        out[k] = p_next
    return Trajectory(out, rm.grid)


def _tracking_cost(rm: ReducedModel, y_hat: np.ndarray) -> float:
    quad = 0.5 * np.sum(y_hat * (y_hat @ rm.ct_m_c), axis=1)
    cross = np.sum(y_hat * rm.g_hat, axis=1)
    return float(np.sum(quad - cross + rm.cost_const))


def reduced_cost(rm: ReducedModel, u_hat: Trajectory, y_hat: Trajectory) -> float:
    """Reduced cost for reduced control coefficients (Gramian = identity)."""
    dt = rm.grid.dt
    track = _tracking_cost(rm, y_hat.values)
    ctrl = 0.5 * rm.prob.beta * float(np.sum(u_hat.values**2))
    return dt * (track + ctrl)


def reduced_cost_full(rm: ReducedModel, u: Trajectory, y_hat: Trajectory) -> float:
    """Reduced cost for a full-space control."""
    dt = rm.grid.dt
    track = _tracking_cost(rm, y_hat.values)
    mu = rm.prob.space.m_u.mat
    ctrl = 0.5 * rm.prob.beta * float(np.sum(u.values * (mu @ u.values.T).T))
    return dt * (track + ctrl)


def lift_control(rm: ReducedModel, u_hat: Trajectory) -> Trajectory:
    """Expand reduced control coefficients into the full control space."""
    return Trajectory(u_hat.values @ rm.u_hat.T, rm.grid)


def project_control(rm: ReducedModel, u: Trajectory) -> Trajectory:
    """M_U-orthogonal projection of a full control onto the reduced basis."""
    mu = rm.prob.space.m_u.mat
    return Trajectory(u.values @ (mu @ rm.u_hat), rm.grid)


def solve_reduced_ocp_full(
    rm: ReducedModel,
    cfg: BbConfig,
    start: Trajectory | None = None,
) -> tuple[Trajectory, BbReport]:
    """Minimize over the reduced control space.

    Everything in the iteration is independent of the FE dimension.  The
    gradient in reduced coefficients is beta * u_hat_k + b_hat' p_hat_k,
    exact for the discretized reduced cost.
    """
    steps = rm.grid.steps
    dt = rm.grid.dt
    if start is None:
        start = Trajectory.zeros(rm.grid, rm.control_rank)
    elif start.dim != rm.control_rank or start.grid != rm.grid:
        raise DimensionMismatch("start control does not match the model")

    def grad_oracle(u_flat):
        u_traj = Trajectory(u_flat, rm.grid)
        y_hat = solve_reduced_state(rm, u_traj)
        p_hat = solve_reduced_adjoint(rm, y_hat)
        grad = rm.prob.beta * u_flat + p_hat.values @ rm.b_hat
        return grad, y_hat

    def inner(a, b):
        return dt * float(np.sum(a * b))

    def cost_fn(u_flat, y_hat):
        return reduced_cost(rm, Trajectory(u_flat, rm.grid), y_hat)

    u_flat, report = bb_minimize(grad_oracle, inner, start.values, cfg, cost_fn)
    return Trajectory(u_flat.reshape(steps, rm.control_rank), rm.grid), report


def solve_reduced_ocp_state_only(
    rm: ReducedModel,
    cfg: BbConfig,
    start: Trajectory | None = None,
) -> tuple[Trajectory, BbReport]:
    """Minimize over the full control space with a reduced state model.

    The gradient is beta * u_k + M_U^{-1} B' (V p_hat_k), assembled through
    the precomputed lift, so no FE-dimension solves occur in the loop; the
    iterate itself still carries the full control dimension.
    """
    steps = rm.grid.steps
    dt = rm.grid.dt
    mu = rm.prob.space.m_u.mat
    if start is None:
        start = Trajectory.zeros(rm.grid, rm.prob.control_dim)
    elif start.dim != rm.prob.control_dim or start.grid != rm.grid:
        raise DimensionMismatch("start control does not match the problem")

    def grad_oracle(u_flat):
        u_traj = Trajectory(u_flat, rm.grid)
        y_hat = solve_reduced_state_full(rm, u_traj)
        p_hat = solve_reduced_adjoint(rm, y_hat)
        grad = rm.prob.beta * u_flat + p_hat.values @ rm.w_lift.T
        return grad, y_hat

    def inner(a, b):
        return dt * float(np.sum(a * (mu @ b.T).T))

    def cost_fn(u_flat, y_hat):
        return reduced_cost_full(rm, Trajectory(u_flat, rm.grid), y_hat)

    u_flat, report = bb_minimize(grad_oracle, inner, start.values, cfg, cost_fn)
    return Trajectory(u_flat.reshape(steps, rm.prob.control_dim), rm.grid), report
