"""Proper orthogonal decomposition by the method of snapshots.

Snapshot trajectories are stacked into a matrix Y whose columns are scaled
by sqrt(dt), so the Gramian G = Y' W Y carries the right-endpoint
discretization of the time integral and the eigenvalue sum equals the total
snapshot energy in L^2(0,T;V).  Modes are recovered as v_i = Y w_i /
sqrt(lambda_i) and then re-orthonormalized in W: the method of snapshots
loses orthogonality on its own once the spectrum spans many orders of
magnitude, and the re-orthonormalization restores it without changing any
of the nested spans, so the eigenvalue tail identity

    sum of squared W-projection errors onto the first r modes
        = sum_{i > r} lambda_i

continues to hold.  Truncation keeps the smallest r whose retained energy
reaches (1 - energy_tol) of the total; eigenvalues below 1e-13 of the
largest are treated as numerical noise and never counted, so energy_tol = 0
requests the full numerical rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import (
    DimensionMismatch,
    SparseSymMatrix,
    eig_sym,
    gram_schmidt,
)
from .problem import TimeGrid, Trajectory

# Eigenvalues below this fraction of the largest are numerical noise.
_RANK_CUTOFF = 1e-13


class EmptySnapshotSet(Exception):
    """POD was requested without any snapshots."""


class ZeroEnergy(Exception):
    """All snapshots are (numerically) zero."""


class SnapshotSet:
    """Growing collection of snapshot trajectories with provenance labels."""

    def __init__(self):
        self.trajectories: list[Trajectory] = []
        self.labels: list[str] = []

    def add(self, traj: Trajectory, label: str = "") -> None:
        if self.trajectories:
            first = self.trajectories[0]
            if traj.grid != first.grid or traj.dim != first.dim:
                raise DimensionMismatch("snapshot does not match the existing set")
        self.trajectories.append(traj)
        self.labels.append(label)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True, eq=False)
class PodBasis:
    """W-orthonormal POD modes with their eigenvalues.

    eigenvalues has one entry per kept mode; tail_energy is the summed
    energy of everything discarded, including sub-cutoff noise.
    """

    modes: np.ndarray        # (N, r), columns W-orthonormal
    eigenvalues: np.ndarray  # (r,), descending
    tail_energy: float

    @property
    def rank(self) -> int:
        return self.modes.shape[1]

    def truncate(self, rank: int) -> "PodBasis":
        """Keep only the first `rank` modes, moving the rest into the tail."""
        if not 1 <= rank <= self.rank:
            raise ValueError(f"rank must lie in [1, {self.rank}], got {rank}")
        dropped = float(np.sum(self.eigenvalues[rank:]))
        return PodBasis(
            self.modes[:, :rank].copy(),
            self.eigenvalues[:rank].copy(),
            self.tail_energy + dropped,
        )


def _snapshot_list(snapshots) -> list[Trajectory]:
    trajs = list(snapshots)
    if not trajs:
        raise EmptySnapshotSet("no snapshots provided")
    first = trajs[0]
    for t in trajs[1:]:
        if t.grid != first.grid or t.dim != first.dim:
            raise DimensionMismatch("snapshots have inconsistent grids or dimensions")
    return trajs


def compute_pod(
    snapshots: Iterable[Trajectory],
    w_v: SparseSymMatrix,
    grid: TimeGrid,
    energy_tol: float,
) -> PodBasis:
    """POD of a snapshot set in the W-weighted space.

    energy_tol = 0 keeps every mode above the numerical-rank cutoff.
    """
    if energy_tol < 0.0:
        raise ValueError(f"energy_tol must be nonnegative, got {energy_tol}")
    trajs = _snapshot_list(snapshots)
    if trajs[0].grid != grid:
        raise DimensionMismatch("snapshot grid does not match the supplied grid")
    scale = np.sqrt(grid.dt)
    y = np.hstack([scale * t.values.T for t in trajs])  # (N, m)
    gram = y.T @ (w_v.mat @ y)
    gram = 0.5 * (gram + gram.T)
    lams, vecs = eig_sym(gram)
    lams = np.maximum(lams, 0.0)
    if lams[0] <= 0.0:
        raise ZeroEnergy("snapshot set carries no energy")

    counted = lams > _RANK_CUTOFF * lams[0]
    counted_vals = lams[counted]
    cumulative = np.cumsum(counted_vals)
    total = cumulative[-1]
    target = (1.0 - energy_tol) * total
    r = int(np.searchsorted(cumulative, target) + 1)
    r = min(r, counted_vals.size)

    modes = y @ (vecs[:, :r] / np.sqrt(lams[:r]))
    # Restore W-orthonormality lost to the small-eigenvalue directions; the
    # triangular sweep preserves every leading span.
    ortho = gram_schmidt(list(modes.T), w_v, drop_tol=1e-8)
    r = len(ortho)
    modes = np.column_stack(ortho)
    tail = float(np.sum(lams) - np.sum(lams[:r]))
    return PodBasis(modes, lams[:r].copy(), tail)


def projection_error(
    snapshots: Iterable[Trajectory],
    basis: PodBasis,
    w_v: SparseSymMatrix,
    grid: TimeGrid,
) -> float:
    """Total squared W-projection error of the snapshots onto the basis."""
    trajs = _snapshot_list(snapshots)
    v = basis.modes
    total = 0.0
    for t in trajs:
        d = t.values.T  # (N, K)
        coeff = v.T @ (w_v.mat @ d)
        resid = d - v @ coeff
        total += grid.dt * float(np.sum(resid * (w_v.mat @ resid)))
    return total


def has_new_information(
    basis: PodBasis,
    candidate: Trajectory,
    w_v: SparseSymMatrix,
    grid: TimeGrid,
    rel_tol: float = 1e-10,
) -> bool:
    """Whether a candidate trajectory sticks out of the basis span.

    True when the W-orthogonal complement of the candidate exceeds rel_tol
    times its own norm; a zero candidate never counts as new.
    """
    d = candidate.values.T
    w_d = w_v.mat @ d
    cnorm_sq = grid.dt * float(np.sum(d * w_d))
    if cnorm_sq <= 0.0:
        return False
    v = basis.modes
    coeff = v.T @ w_d
    resid = d - v @ coeff
    rnorm_sq = grid.dt * float(np.sum(resid * (w_v.mat @ resid)))
    return np.sqrt(max(rnorm_sq, 0.0)) > rel_tol * np.sqrt(cnorm_sq)
