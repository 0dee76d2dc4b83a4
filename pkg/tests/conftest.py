"""Shared fixtures: cached FE spaces, model problems, and dense reference solves.

Everything returned by these factories is treated as read-only by the tests;
caching across the session keeps the suite fast without changing results.
"""

from functools import lru_cache

import pytest

from podopt import FomSolver, build_space, kkt_oracle, model_problem


@lru_cache(maxsize=None)
def _space(nodes_per_side):
    return build_space(nodes_per_side)


@lru_cache(maxsize=None)
def _problem(nodes_per_side, steps, beta):
    return model_problem(nodes_per_side, steps, beta, space=_space(nodes_per_side))


@lru_cache(maxsize=None)
def _kkt_control(nodes_per_side, steps, beta):
    prob = _problem(nodes_per_side, steps, beta)
    return kkt_oracle(prob, FomSolver(prob))


@pytest.fixture(scope="session")
def space_for():
    """space_for(n) -> cached FeSpace on the n-by-n unit-square grid."""
    return _space


@pytest.fixture(scope="session")
def problem_for():
    """problem_for(n, steps, beta) -> cached model problem instance."""
    return _problem


@pytest.fixture(scope="session")
def kkt_for():
    """kkt_for(n, steps, beta) -> cached dense-solve optimal control."""
    return _kkt_control
