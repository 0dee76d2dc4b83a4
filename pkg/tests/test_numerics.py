"""Linear-algebra substrate: validated matrices, SPD solves, eigensolver,
weighted Gram-Schmidt."""

import numpy as np
import pytest
import scipy.sparse as sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from podopt import (
    DenseSymMatrix,
    DimensionMismatch,
    EmptyOutput,
    NotSpd,
    SparseSymMatrix,
    SpdFactor,
    eig_sym,
    gram_schmidt,
    m_inner,
    solve_spd,
    sparse_sym,
)


def random_spd(n, rng, shift=None):
    r = rng.standard_normal((n, n))
    a = r @ r.T + (n if shift is None else shift) * np.eye(n)
    return sparse_sym(a)


# ---------------------------------------------------------------- matrices


def test_sparse_sym_accepts_symmetric():
    a = sparse_sym(np.array([[2.0, 1.0], [1.0, 3.0]]))
    assert a.n == 2
    assert np.allclose(a.toarray(), [[2.0, 1.0], [1.0, 3.0]])


def test_sparse_sym_rejects_nonsquare():
    with pytest.raises(DimensionMismatch):
        sparse_sym(np.ones((2, 3)))


def test_sparse_sym_rejects_asymmetric():
    with pytest.raises(ValueError):
        sparse_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sparse_sym_rejects_nan():
    with pytest.raises(ValueError):
        sparse_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_sparse_sym_tolerates_roundoff_asymmetry():
    a = np.array([[1.0, 0.5], [0.5 + 1e-14, 1.0]])
    assert sparse_sym(a).n == 2


def test_sparse_sym_converts_other_formats():
    coo = sparse.coo_matrix(np.eye(3))
    a = SparseSymMatrix(coo)
    assert a.mat.format == "csr"


def test_matmul_matches_dense():
    rng = np.random.default_rng(3)
    a = random_spd(6, rng)
    x = rng.standard_normal(6)
    assert np.allclose(a @ x, a.toarray() @ x)
    assert np.allclose(a.dot(x), a.toarray() @ x)


def test_dense_sym_validation():
    DenseSymMatrix(np.eye(4))
    with pytest.raises(ValueError):
        DenseSymMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        DenseSymMatrix(np.ones(3))


# ---------------------------------------------------------------- SPD solve


def test_spd_solve_residual_small():
    """Direct solve of a random 20x20 SPD system meets the residual contract."""
    rng = np.random.default_rng(0)
    a = random_spd(20, rng)
    b = rng.standard_normal(20)
    x = solve_spd(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_spd_factor_multiple_rhs():
    rng = np.random.default_rng(1)
    a = random_spd(15, rng)
    f = SpdFactor(a)
    b = rng.standard_normal((15, 4))
    x = f.solve(b)
    assert x.shape == (15, 4)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_spd_factor_reuse_is_consistent():
    rng = np.random.default_rng(2)
    a = random_spd(10, rng)
    f = SpdFactor(a)
    b1, b2 = rng.standard_normal(10), rng.standard_normal(10)
    assert np.allclose(f.solve(b1) + f.solve(b2), f.solve(b1 + b2), atol=1e-12)


def test_indefinite_matrix_rejected():
    with pytest.raises(NotSpd):
        SpdFactor(sparse_sym(np.diag([1.0, -1.0, 2.0])))


def test_singular_matrix_rejected():
    with pytest.raises(NotSpd):
        SpdFactor(sparse_sym(np.ones((3, 3))))


def test_zero_diagonal_rejected():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NotSpd):
        SpdFactor(sparse_sym(a))


def test_solve_shape_mismatch():
    f = SpdFactor(sparse_sym(np.eye(4)))
    with pytest.raises(DimensionMismatch):
        f.solve(np.ones(5))


# ---------------------------------------------------------------- eigensolver


def test_eig_sym_descending_and_reconstructs():
    rng = np.random.default_rng(4)
    r = rng.standard_normal((12, 12))
    g = 0.5 * (r + r.T)
    vals, vecs = eig_sym(g)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.T, g, atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(12), atol=1e-10)


def test_eig_sym_known_spectrum():
    vals, vecs = eig_sym(np.diag([1.0, 5.0, 3.0]))
    assert np.allclose(vals, [5.0, 3.0, 1.0])


@settings(deadline=None, max_examples=25)
@given(n=st.integers(min_value=1, max_value=10), seed=st.integers(0, 2**31 - 1))
def test_eig_sym_reconstruction_property(n, seed):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((n, n))
    g = 0.5 * (r + r.T)
    vals, vecs = eig_sym(g)
    scale = max(1.0, np.abs(vals).max())
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - g) <= 1e-10 * scale


# ---------------------------------------------------------------- inner product


def test_m_inner_matches_quadratic_form():
    rng = np.random.default_rng(5)
    a = random_spd(7, rng)
    x, y = rng.standard_normal(7), rng.standard_normal(7)
    assert np.isclose(m_inner(a, x, y), x @ a.toarray() @ y)
    assert np.isclose(m_inner(a.toarray(), x, y), m_inner(a, x, y))


# ---------------------------------------------------------------- Gram-Schmidt


def test_gram_schmidt_drops_duplicate():
    e1 = np.array([1.0, 0.0])
    out = gram_schmidt([e1, 2.0 * e1], np.eye(2))
    assert len(out) == 1
    assert np.allclose(np.abs(out[0]), e1)


def test_gram_schmidt_orthonormal_in_weighted_product():
    rng = np.random.default_rng(6)
    m = random_spd(9, rng, shift=1.0)
    vecs = [rng.standard_normal(9) for _ in range(5)]
    out = gram_schmidt(vecs, m)
    q = np.column_stack(out)
    gram = q.T @ (m @ q)
    assert np.abs(gram - np.eye(len(out))).max() <= 1e-10


def test_gram_schmidt_preserves_span():
    rng = np.random.default_rng(7)
    vecs = [rng.standard_normal(6) for _ in range(3)]
    out = gram_schmidt(vecs, np.eye(6))
    q = np.column_stack(out)
    for v in vecs:
        resid = v - q @ (q.T @ v)
        assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(v)


def test_gram_schmidt_zero_vectors_skipped():
    out = gram_schmidt([np.zeros(3), np.array([0.0, 2.0, 0.0])], np.eye(3))
    assert len(out) == 1


def test_gram_schmidt_all_dropped_raises():
    with pytest.raises(EmptyOutput):
        gram_schmidt([np.zeros(4)], np.eye(4))


@settings(deadline=None, max_examples=25)
@given(
    n=st.integers(min_value=2, max_value=8),
    count=st.integers(min_value=1, max_value=10),
    seed=st.integers(0, 2**31 - 1),
)
def test_gram_schmidt_output_property(n, count, seed):
    """Output is M-orthonormal, no larger than the input, within the span."""
    rng = np.random.default_rng(seed)
    m = random_spd(n, rng, shift=1.0)
    vecs = [rng.standard_normal(n) for _ in range(count)]
    out = gram_schmidt(vecs, m)
    assert 1 <= len(out) <= min(count, n)
    q = np.column_stack(out)
    assert np.abs(q.T @ (m @ q) - np.eye(len(out))).max() <= 1e-10
