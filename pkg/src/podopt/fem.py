"""P1 finite elements on the unit square.

Structured triangulation of [0,1]^2: nodes lie on an n_s x n_s grid in
lexicographic order (x1 varies fastest), every grid cell is split along its
bottom-left to top-right diagonal.  Element mass and stiffness matrices use
the exact closed-form P1 expressions, so no quadrature error enters the
assembled operators.  No boundary conditions are imposed: the discrete
spaces approximate H^1 and L^2 on the whole square, and the H^1 weight
is W = M + K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sparse

from .numerics import SparseSymMatrix


class NonFiniteValue(Exception):
    """A nodal value evaluated to NaN or Inf."""


@dataclass(frozen=True, eq=False)
class UnitSquareMesh:
    """Triangulated unit square with lexicographically ordered nodes."""

    nodes_per_side: int
    coords: np.ndarray      # (n_nodes, 2)
    triangles: np.ndarray   # (n_cells, 3), counterclockwise

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / (self.nodes_per_side - 1)


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Assembled P1 space: mesh plus mass, stiffness and inner-product matrices.

    m_mass is the L^2 Gramian, k_stiff the H^1 seminorm part, w_h1 their sum
    (the V inner product) and m_u the control-space Gramian, which for the
    L^2 control space coincides with m_mass.
    """

    mesh: UnitSquareMesh
    m_mass: SparseSymMatrix
    k_stiff: SparseSymMatrix
    w_h1: SparseSymMatrix
    m_u: SparseSymMatrix

    @property
    def dim(self) -> int:
        return self.mesh.n_nodes


def unit_square_mesh(nodes_per_side: int) -> UnitSquareMesh:
    """Build the structured triangulation with nodes_per_side >= 2."""
    n = int(nodes_per_side)
    if n < 2:
        raise ValueError(f"nodes_per_side must be at least 2, got {n}")
    ticks = np.linspace(0.0, 1.0, n)
    x2, x1 = np.meshgrid(ticks, ticks, indexing="ij")  # x1 fastest
    coords = np.column_stack([x1.ravel(), x2.ravel()])

    ii, jj = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="xy")
    v00 = (jj * n + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + n
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])  # below the diagonal
    upper = np.column_stack([v00, v11, v01])  # above the diagonal
    triangles = np.vstack([lower, upper])
    return UnitSquareMesh(n, coords, triangles)


def _assemble(mesh: UnitSquareMesh) -> tuple[SparseSymMatrix, SparseSymMatrix]:
    tri = mesh.triangles
    p = mesh.coords[tri]                      # (n_cells, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    # P1 shape-function coefficients on each triangle
    b = np.stack(
        [y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1
    )
    c = np.stack(
        [x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1
    )
    area = 0.5 * (
        (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    )
    if np.any(area <= 0.0):
        raise ValueError("mesh contains degenerate or misoriented triangles")

    k_loc = (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    ) / (4.0 * area)[:, None, None]
    m_pattern = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = area[:, None, None] * m_pattern[None, :, :]

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    k_mat = sparse.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    m_mat = sparse.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return SparseSymMatrix(m_mat), SparseSymMatrix(k_mat)


def build_space(nodes_per_side: int) -> FeSpace:
    """Assemble the P1 space on the unit square."""
    mesh = unit_square_mesh(nodes_per_side)
    m_mass, k_stiff = _assemble(mesh)
    w_h1 = SparseSymMatrix((m_mass.mat + k_stiff.mat).tocsr())
    return FeSpace(mesh, m_mass, k_stiff, w_h1, m_mass)


def interpolate(space: FeSpace, f: Callable) -> np.ndarray:
    """Nodal interpolation of a scalar function f(x1, x2).

    f may be vectorized over numpy arrays; a plain scalar callable works too.
    """
    x1 = space.mesh.coords[:, 0]
    x2 = space.mesh.coords[:, 1]
    try:
        vals = np.asarray(f(x1, x2), dtype=float)
        if vals.shape != x1.shape:
            vals = np.broadcast_to(vals, x1.shape).astype(float)
    except (TypeError, ValueError):
        vals = np.array([float(f(a, b)) for a, b in zip(x1, x2)])
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("interpolated values contain NaN or Inf")
    return vals
