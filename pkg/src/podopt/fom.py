"""Full-order solves: implicit Euler state and adjoint sweeps, cost,
the exact discrete gradient and a dense KKT oracle for small instances.

Discretize-then-optimize: the adjoint recursion below is the exact transpose
of the implicit Euler state recursion under the right-endpoint cost, so the
returned gradient is the exact gradient of the discrete reduced cost.  That
exactness is what finite-difference tests and the KKT oracle check against.

State (k = 1..K, y_0 given):
    (M + dt A(t_k)) y_k = M y_{k-1} + dt B u_k
Adjoint (k = K..1, p_{K+1} = 0):
    (M + dt A(t_k)) p_k = M p_{k+1} + dt C' M_H (C y_k - y_d_k)
Gradient slice:
    g_k = beta u_k + M_U^{-1} B' p_k
"""

from __future__ import annotations

import numpy as np

from .numerics import DimensionMismatch, SparseSymMatrix, SpdFactor
from .problem import OcpProblem, Trajectory, space_time_inner

# Dense KKT assembly is quadratic in K * control_dim; refuse beyond this.
_KKT_LIMIT = 5000


class TooLarge(Exception):
    """Problem dimensions exceed a brute-force guard."""


class FomSolver:
    """Workspace bound to one problem: cached per-step factorizations and
    solve counters.

    The matrices M + dt A(t_k) depend only on the problem, so their
    factorizations are computed lazily once per step index and reused by
    every state/adjoint solve, including across optimization iterations.
    The counters record whole trajectory solves, not time steps.
    """

    def __init__(self, prob: OcpProblem):
        self.prob = prob
        self._factors: list[SpdFactor | None] = [None] * prob.grid.steps
        self._mu_factor: SpdFactor | None = None
        self.state_solves = 0
        self.adjoint_solves = 0

    def _factor(self, k: int) -> SpdFactor:
        """Factorization of M + dt A(t_k) for step k in 1..K."""
        cached = self._factors[k - 1]
        if cached is None:
            prob = self.prob
            t_k = prob.grid.dt * k
            mat = prob.space.m_mass.mat + prob.grid.dt * prob.op.assemble(t_k)
            cached = SpdFactor(SparseSymMatrix(mat.tocsr()))
            self._factors[k - 1] = cached
        return cached

    def mu_factor(self) -> SpdFactor:
        if self._mu_factor is None:
            self._mu_factor = SpdFactor(self.prob.space.m_u)
        return self._mu_factor

    def _check_control(self, u: Trajectory) -> None:
        if u.grid != self.prob.grid:
            raise DimensionMismatch("control grid does not match the problem")
        if u.dim != self.prob.control_dim:
            raise DimensionMismatch(
                f"control dimension {u.dim} != {self.prob.control_dim}"
            )

    def solve_state(self, u: Trajectory) -> Trajectory:
        """Implicit Euler sweep forward from the problem's initial value."""
        self._check_control(u)
        prob = self.prob
        dt = prob.grid.dt
        m = prob.space.m_mass.mat
        out = np.empty((prob.grid.steps, prob.space.dim))
        y_prev = prob.y0
        for k in range(1, prob.grid.steps + 1):
            rhs = m @ y_prev + dt * (prob.b_map @ u.values[k - 1])
            y_prev = self._factor(k).solve(rhs)
            out[k - 1] = y_prev
        self.state_solves += 1
        return Trajectory(out, prob.grid)

    def solve_adjoint(self, y: Trajectory) -> Trajectory:
        """Backward sweep driven by the observation misfit of y."""
        prob = self.prob
        if y.grid != prob.grid or y.dim != prob.space.dim:
            raise DimensionMismatch("state trajectory does not match the problem")
        dt = prob.grid.dt
        m = prob.space.m_mass.mat
        out = np.empty_like(y.values)
        p_next = np.zeros(prob.space.dim)
        for k in range(prob.grid.steps, 0, -1):
            misfit = prob.c_map @ y.values[k - 1] - prob.y_d.values[k - 1]
            rhs = m @ p_next + dt * (prob.c_map.T @ (m @ misfit))
            p_next = self._factor(k).solve(rhs)
            out[k - 1] = p_next
        self.adjoint_solves += 1
        return Trajectory(out, prob.grid)

    def cost(self, u: Trajectory, y: Trajectory) -> float:
        """Discrete tracking cost of a given control/state pair."""
        prob = self.prob
        self._check_control(u)
        m = prob.space.m_mass.mat
        misfit = (prob.c_map @ y.values.T).T - prob.y_d.values
        track = float(np.sum(misfit * (m @ misfit.T).T))
        mu = prob.space.m_u.mat
        ctrl = float(np.sum(u.values * (mu @ u.values.T).T))
        return 0.5 * prob.grid.dt * (track + prob.beta * ctrl)

    def gradient(self, u: Trajectory) -> tuple[Trajectory, Trajectory, Trajectory]:
        """Exact discrete gradient; returns (gradient, state, adjoint)."""
        prob = self.prob
        y = self.solve_state(u)
        p = self.solve_adjoint(y)
        lifted = self.mu_factor().solve(prob.b_map.T @ p.values.T).T
        grad = Trajectory(prob.beta * u.values + lifted, prob.grid)
        return grad, y, p


def solve_state(prob: OcpProblem, u: Trajectory) -> Trajectory:
    return FomSolver(prob).solve_state(u)


def solve_adjoint(prob: OcpProblem, y: Trajectory) -> Trajectory:
    return FomSolver(prob).solve_adjoint(y)


def cost(prob: OcpProblem, u: Trajectory, y: Trajectory) -> float:
    return FomSolver(prob).cost(u, y)


def gradient(prob: OcpProblem, u: Trajectory) -> tuple[Trajectory, Trajectory, Trajectory]:
    return FomSolver(prob).gradient(u)


def kkt_oracle(prob: OcpProblem, solver: FomSolver | None = None) -> Trajectory:
    """Exact discrete minimizer by dense linear algebra.

    The gradient is affine in the control, grad(u) = Q u - d with Q the
    (Riesz-represented) Hessian.  Columns of Q are recovered by applying the
    gradient to unit controls, then Q u = d is solved densely.  Only
    intended as a test oracle: guarded to K * control_dim <= 5000.
    """
    dim = prob.grid.steps * prob.control_dim
    if dim > _KKT_LIMIT:
        raise TooLarge(
            f"dense KKT needs {dim} columns, limit is {_KKT_LIMIT}"
        )
    solver = solver if solver is not None else FomSolver(prob)
    shape = (prob.grid.steps, prob.control_dim)

    def grad_vec(flat: np.ndarray) -> np.ndarray:
        g, _, _ = solver.gradient(Trajectory(flat.reshape(shape), prob.grid))
        return g.values.ravel()

    g0 = grad_vec(np.zeros(dim))
    q = np.empty((dim, dim))
    unit = np.zeros(dim)
    for j in range(dim):
        unit[j] = 1.0
        q[:, j] = grad_vec(unit) - g0
        unit[j] = 0.0
    u_flat = np.linalg.solve(q, -g0)
    if __debug__:
        resid = np.linalg.norm(q @ u_flat + g0) / max(np.linalg.norm(g0), 1e-300)
        assert resid <= 1e-8, f"dense KKT residual {resid:.3e}"
    return Trajectory(u_flat.reshape(shape), prob.grid)


def gradient_inner(prob: OcpProblem, a: Trajectory, b: Trajectory) -> float:
    """Control-space inner product used for gradients and norms."""
    return space_time_inner(a, b, prob.space.m_u, prob.grid)
