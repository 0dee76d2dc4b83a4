"""P1 finite elements on the structured unit-square triangulation.

The exact oracles exploit two facts: the element mass matrix integrates
products of piecewise-linear functions exactly, and gradients of nodal
interpolants of affine functions are reproduced exactly.  Smooth non-linear
integrands are checked against tensor Gauss-Legendre quadrature with the
expected O(h^2) convergence of the interpolation error.
"""

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from podopt import NonFiniteValue, build_space, interpolate, target_state, unit_square_mesh


def quad_norm_sq(f, order=24):
    """Tensor Gauss-Legendre approximation of the squared L2 norm on (0,1)^2."""
    x, w = leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return float(np.sum(np.outer(w, w) * f(x1, x2) ** 2))


# ---------------------------------------------------------------- mesh


def test_mesh_counts():
    mesh = unit_square_mesh(5)
    assert mesh.coords.shape == (25, 2)
    assert mesh.triangles.shape == (32, 3)
    assert mesh.h == pytest.approx(0.25)


def test_mesh_rejects_degenerate():
    with pytest.raises(ValueError):
        unit_square_mesh(1)


def test_nodes_ordered_first_coordinate_fastest():
    mesh = unit_square_mesh(4)
    step = mesh.coords[1] - mesh.coords[0]
    assert step[0] > 0.0 and step[1] == 0.0
    assert np.allclose(mesh.coords[0], [0.0, 0.0])
    assert np.allclose(mesh.coords[-1], [1.0, 1.0])


def test_triangles_positively_oriented():
    mesh = unit_square_mesh(6)
    p = mesh.coords[mesh.triangles]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    assert np.all(cross > 0.0)
    assert np.isclose(cross.sum() / 2.0, 1.0)


# ---------------------------------------------------------------- matrices


def test_mass_matrix_total_mass():
    """1' M 1 integrates the constant 1 over the unit square exactly."""
    space = build_space(7)
    ones = np.ones(space.dim)
    assert ones @ (space.m_mass @ ones) == pytest.approx(1.0, abs=1e-14)


def test_mass_matrix_exact_for_linear_functions():
    # x1 lies in the P1 space, and M integrates P1 products exactly:
    # the quadratic form must equal the continuous integral of x1^2.
    space = build_space(9)
    v = interpolate(space, lambda x1, x2: x1)
    assert v @ (space.m_mass @ v) == pytest.approx(1.0 / 3.0, rel=1e-14)
    a, b, c = 2.0, -1.0, 3.0
    w = interpolate(space, lambda x1, x2: a + b * x1 + c * x2)
    exact = a**2 + b**2 / 3.0 + c**2 / 3.0 + a * b + a * c + b * c / 2.0
    assert w @ (space.m_mass @ w) == pytest.approx(exact, rel=1e-13)


def test_stiffness_annihilates_constants():
    space = build_space(8)
    ones = np.ones(space.dim)
    assert np.abs(space.k_stiff @ ones).max() <= 1e-13


def test_stiffness_exact_for_linear_functions():
    """The Dirichlet energy of x1 and of x1 + x2 comes out exactly."""
    space = build_space(6)
    v = interpolate(space, lambda x1, x2: x1)
    assert v @ (space.k_stiff @ v) == pytest.approx(1.0, rel=1e-14)
    w = interpolate(space, lambda x1, x2: x1 + x2)
    assert w @ (space.k_stiff @ w) == pytest.approx(2.0, rel=1e-14)


def test_stiffness_positive_semidefinite():
    space = build_space(5)
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = rng.standard_normal(space.dim)
        assert v @ (space.k_stiff @ v) >= -1e-13


def test_h1_weight_is_mass_plus_stiffness():
    space = build_space(6)
    gap = (space.w_h1.mat - space.m_mass.mat - space.k_stiff.mat).toarray()
    assert np.abs(gap).max() <= 1e-14


def test_control_weight_equals_mass():
    space = build_space(5)
    assert (space.m_u.mat != space.m_mass.mat).nnz == 0


# ------------------------------------------------- interpolation accuracy


def test_interpolated_norm_converges_to_quadrature():
    """Squared L2 norm of the sine interpolant converges at O(h^2) to 1/4."""
    exact = 0.25
    errs = {}
    for n in (9, 17, 33):
        space = build_space(n)
        v = interpolate(space, lambda x1, x2: np.sin(np.pi * x1) * np.sin(np.pi * x2))
        errs[n] = abs(float(v @ (space.m_mass @ v)) - exact)
    assert errs[33] <= 1e-2 * exact
    assert 3.0 <= errs[9] / errs[17] <= 5.0
    assert 3.0 <= errs[17] / errs[33] <= 5.0


def test_target_snapshot_norm_matches_quadrature():
    ref = quad_norm_sq(lambda x1, x2: target_state(0.6, x1, x2))
    errs = {}
    for n in (17, 33):
        space = build_space(n)
        v = interpolate(space, lambda x1, x2: target_state(0.6, x1, x2))
        errs[n] = abs(float(v @ (space.m_mass @ v)) - ref)
    assert errs[33] <= 1e-2 * ref
    assert errs[33] < errs[17]


def test_target_state_closed_form():
    x1, x2 = 0.3, 0.8
    t = 0.5
    want = np.sin(2.0 * np.pi * x1 * t) * np.sin(2.0 * np.pi * x2 * t) * np.exp(2.0 * x1) / 6.0
    assert target_state(t, x1, x2) == pytest.approx(want, rel=1e-15)
    assert target_state(0.0, x1, x2) == 0.0


# ---------------------------------------------------------------- interpolate


def test_interpolate_scalar_callable_fallback():
    space = build_space(4)
    import math

    v = interpolate(space, lambda x1, x2: math.sin(x1) + x2)
    w = interpolate(space, lambda x1, x2: np.sin(x1) + x2)
    assert np.allclose(v, w)


def test_interpolate_rejects_non_finite():
    space = build_space(4)
    with pytest.raises(NonFiniteValue):
        interpolate(space, lambda x1, x2: np.where(x1 > 0.5, np.inf, 1.0))


def test_space_dimension():
    assert build_space(12).dim == 144
