"""Problem data for the linear-quadratic parabolic tracking problem.

The continuous problem is

    min  1/2 int_0^T ||C(t) y - y_d||^2_H dt  +  beta/2 int_0^T ||u||^2_U dt
    s.t. d/dt y + A(t) y = B u,   y(0) = y0,

with U = H = L^2(Omega), V = H^1(Omega) on the unit square.  Everything in
this module is discrete: states and controls are FE coefficient vectors,
time-dependent quantities are trajectories sampled at the right endpoints
t_1 .. t_K of a uniform grid, and all time integrals use the right-endpoint
rectangle rule matching the implicit Euler stepping.

The concrete instance (``model_problem``) uses the operator
A(t) = K + (2 + sin(4 pi t)) M, the control embedding B = M, the identity
observation C, homogeneous initial data and the target

    y_d(t, x) = 1/6 sin(2 pi x1 t) sin(2 pi x2 t) exp(2 x1).

Since 2 + sin(4 pi t) >= 1, the bilinear form dominates the full H^1 inner
product with coercivity constant 1, and the solution-operator norm bound
||C S|| <= 1 follows, giving the estimator constant 1/(beta + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .fem import FeSpace, build_space, interpolate
from .numerics import DenseSymMatrix, DimensionMismatch, SparseSymMatrix


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, horizon] with K steps of size horizon/K."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def step_times(self) -> np.ndarray:
        """The right endpoints t_1 .. t_K carrying trajectory slices."""
        return self.dt * np.arange(1, self.steps + 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-discrete trajectory: slice k holds the value at t_{k+1}.

    The initial time t_0 is never stored; initial data lives in the problem.
    """

    values: np.ndarray  # (K, d)
    grid: TimeGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise DimensionMismatch(f"trajectory values must be 2-d, got {v.ndim}-d")
        if v.shape[0] != self.grid.steps:
            raise DimensionMismatch(
                f"trajectory has {v.shape[0]} slices, grid has {self.grid.steps} steps"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("trajectory contains non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int) -> "Trajectory":
        return cls(np.zeros((grid.steps, dim)), grid)

    def _check_compatible(self, other: "Trajectory") -> None:
        if self.grid != other.grid or self.dim != other.dim:
            raise DimensionMismatch("trajectories have different grids or dimensions")

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check_compatible(other)
        return Trajectory(self.values + other.values, self.grid)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check_compatible(other)
        return Trajectory(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "Trajectory":
        return Trajectory(self.values * float(scalar), self.grid)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class AffineOperator:
    """Time-dependent operator A(t) = sum_q theta_q(t) A_q with symmetric A_q."""

    components: tuple
    coefficients: tuple

    def __post_init__(self):
        if len(self.components) != len(self.coefficients):
            raise DimensionMismatch("one coefficient function per component required")
        if not self.components:
            raise ValueError("at least one component required")
        n = self.components[0].n
        for a in self.components:
            if a.n != n:
                raise DimensionMismatch("components have inconsistent dimensions")

    @property
    def n(self) -> int:
        return self.components[0].n

    def assemble(self, t: float) -> sparse.csr_matrix:
        """The sparse matrix of A(t)."""
        out = None
        for a, theta in zip(self.components, self.coefficients):
            term = float(theta(t)) * a.mat
            out = term if out is None else out + term
        return out.tocsr()


@dataclass(frozen=True, eq=False)
class OcpProblem:
    """Discrete optimal-control problem data.

    b_map sends control coefficients to a load vector (columns index the
    control space), c_map sends state coefficients to observation
    coefficients.  eta_v is the coercivity constant of the bilinear form
    against the V inner product, cs_norm_bound an upper bound for the norm
    of the control-to-observation solution operator; both feed the error
    estimator.
    """

    space: FeSpace
    grid: TimeGrid
    op: AffineOperator
    b_map: sparse.spmatrix
    c_map: sparse.spmatrix
    y_d: Trajectory
    y0: np.ndarray
    beta: float
    eta_v: float
    cs_norm_bound: float

    def __post_init__(self):
        n = self.space.dim
        if self.op.n != n or self.b_map.shape[0] != n or self.c_map.shape[1] != n:
            raise DimensionMismatch("operator blocks do not match the FE space")
        if self.y_d.dim != self.c_map.shape[0]:
            raise DimensionMismatch("target dimension does not match the observation")
        if self.y0.shape != (n,):
            raise DimensionMismatch("initial value does not match the FE space")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def control_dim(self) -> int:
        return self.b_map.shape[1]


def target_state(t: float, x1, x2):
    """Time-dependent tracking target; identically zero at t = 0."""
    return (
        np.sin(2.0 * math.pi * x1 * t)
        * np.sin(2.0 * math.pi * x2 * t)
        * np.exp(2.0 * x1)
        / 6.0
    )


def model_problem(
    nodes_per_side: int,
    steps: int,
    beta: float,
    horizon: float = 1.0,
    space: FeSpace | None = None,
) -> OcpProblem:
    """The concrete heat-type tracking problem on the unit square.

    Passing a pre-built space avoids re-assembly when several instances at
    the same resolution are needed.
    """
    if space is None:
        space = build_space(nodes_per_side)
    elif space.mesh.nodes_per_side != nodes_per_side:
        raise DimensionMismatch("provided space does not match nodes_per_side")
    grid = TimeGrid(horizon, steps)
    op = AffineOperator(
        components=(space.k_stiff, space.m_mass),
        coefficients=(lambda t: 1.0, lambda t: 2.0 + math.sin(4.0 * math.pi * t)),
    )
    y_d_slices = np.stack(
        [
            interpolate(space, lambda x1, x2, tk=tk: target_state(tk, x1, x2))
            for tk in grid.step_times()
        ]
    )
    n = space.dim
    return OcpProblem(
        space=space,
        grid=grid,
        op=op,
        b_map=space.m_mass.mat,
        c_map=sparse.identity(n, format="csr"),
        y_d=Trajectory(y_d_slices, grid),
        y0=np.zeros(n),
        beta=float(beta),
        eta_v=1.0,
        cs_norm_bound=1.0,
    )


def _weight_matrix(m):
    if isinstance(m, (SparseSymMatrix, DenseSymMatrix)):
        return m.mat
    return m


def space_time_inner(u: Trajectory, v: Trajectory, m, grid: TimeGrid) -> float:
    """L^2(0,T;U)-type inner product with spatial weight M, right-endpoint rule."""
    if u.grid != grid or v.grid != grid:
        raise DimensionMismatch("trajectory grids do not match")
    u._check_compatible(v)
    mm = _weight_matrix(m)
    if mm.shape[0] != u.dim:
        raise DimensionMismatch("weight matrix does not match trajectory dimension")
    return grid.dt * float(np.sum(u.values * (mm @ v.values.T).T))


def space_time_norm(u: Trajectory, m, grid: TimeGrid) -> float:
    """Space-time norm induced by space_time_inner."""
    return math.sqrt(max(space_time_inner(u, u, m, grid), 0.0))
