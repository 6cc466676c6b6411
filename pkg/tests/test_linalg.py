import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from platefsi.linalg import (
    SingularSystemError,
    TripletBuffer,
    fractional_gram,
    generalized_eig,
    solve_sparse,
    to_csr,
)


def test_to_csr_sums_duplicates():
    buf = TripletBuffer(2, 2)
    buf.add([0, 0], [0, 0], [1.0, 2.0])
    mat = to_csr(buf)
    assert mat[0, 0] == 3.0
    assert mat.nnz == 1


def test_to_csr_empty_buffer():
    mat = to_csr(TripletBuffer(3, 4))
    assert mat.shape == (3, 4)
    assert mat.nnz == 0


def test_to_csr_against_dense_accumulation():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 50, size=500)
    cols = rng.integers(0, 50, size=500)
    vals = rng.standard_normal(500)
    dense = np.zeros((50, 50))
    for r, c, v in zip(rows, cols, vals):
        dense[r, c] += v
    buf = TripletBuffer(50, 50)
    buf.add(rows, cols, vals)
    assert np.allclose(to_csr(buf).toarray(), dense, atol=1e-14)


def test_to_csr_index_out_of_range():
    buf = TripletBuffer(2, 2)
    with pytest.raises(ValueError):
        buf.add([2], [0], [1.0])
    with pytest.raises(ValueError):
        buf.add([0], [-1], [1.0])


def test_solve_identity():
    b = np.array([3.0, -1.0, 2.0])
    x = solve_sparse(sp.eye(3, format="csr"), b)
    assert np.allclose(x, b, atol=1e-14)


def test_solve_diagonal():
    mat = sp.diags([2.0, 4.0]).tocsr()
    x = solve_sparse(mat, np.array([2.0, 4.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_spd_against_cholesky():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((100, 100))
    spd = a @ a.T + 100 * np.eye(100)
    b = rng.standard_normal(100)
    x = solve_sparse(sp.csr_matrix(spd), b)
    ref = scipy.linalg.cho_solve(scipy.linalg.cho_factor(spd), b)
    assert np.abs(x - ref).max() <= 1e-9


def test_solve_singular_reports_pivot():
    mat = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularSystemError) as info:
        solve_sparse(mat, np.array([1.0, 1.0]))
    assert info.value.pivot_index == 1


def test_solve_rejects_rectangular():
    with pytest.raises(ValueError):
        solve_sparse(sp.csr_matrix(np.ones((2, 3))), np.ones(2))


def test_generalized_eig_diagonal_cases():
    vals, vecs = generalized_eig(np.diag([8.0, 2.0]), np.eye(2))
    assert np.allclose(vals, [2.0, 8.0])
    vals1, _ = generalized_eig(np.array([[2.0]]), np.array([[2.0]]))
    assert np.allclose(vals1, [1.0])


def test_generalized_eig_reconstruction_and_orthonormality():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((40, 40))
    a = 0.5 * (a + a.T)
    c = rng.standard_normal((40, 40))
    b = c @ c.T + 40 * np.eye(40)
    vals, vecs = generalized_eig(a, b)
    assert np.all(np.diff(vals) >= -1e-12)
    resid = np.abs(a @ vecs - b @ vecs @ np.diag(vals)).max()
    assert resid / np.abs(a).max() <= 1e-9
    assert np.abs(vecs.T @ b @ vecs - np.eye(40)).max() <= 1e-9


def test_generalized_eig_rejects_indefinite_b():
    with pytest.raises(ValueError):
        generalized_eig(np.eye(2), np.diag([1.0, -1.0]))


def _random_pencil(rng, n=25):
    c = rng.standard_normal((n, n))
    mass = c @ c.T + n * np.eye(n)
    d = rng.standard_normal((n, n))
    stiffness = d @ d.T
    return mass, stiffness


def test_fractional_gram_zero_exponent_is_mass():
    rng = np.random.default_rng(3)
    mass, stiffness = _random_pencil(rng)
    out = fractional_gram(mass, stiffness, 0.0)
    assert np.array_equal(out, mass)


def test_fractional_gram_unit_exponent_reconstructs():
    rng = np.random.default_rng(4)
    mass, stiffness = _random_pencil(rng)
    out = fractional_gram(mass, stiffness, 1.0)
    assert np.abs(out - (stiffness + mass)).max() <= 1e-9 * np.abs(stiffness + mass).max()


def test_fractional_gram_half_powers_compose_to_mass():
    rng = np.random.default_rng(5)
    mass, stiffness = _random_pencil(rng)
    plus = fractional_gram(mass, stiffness, 0.5)
    minus = fractional_gram(mass, stiffness, -0.5)
    composed = plus @ np.linalg.solve(mass, minus)
    assert np.abs(composed - mass).max() <= 1e-8 * np.abs(mass).max()


@pytest.mark.parametrize("s", [-0.5, -0.25, 0.5, 1.5])
def test_fractional_gram_is_spd(s):
    rng = np.random.default_rng(6)
    mass, stiffness = _random_pencil(rng)
    out = fractional_gram(mass, stiffness, s)
    assert np.abs(out - out.T).max() <= 1e-9 * np.abs(out).max()
    assert np.all(np.linalg.eigvalsh(out) > 0)


def test_solves_are_deterministic():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((60, 60)) + 60 * np.eye(60)
    b = rng.standard_normal(60)
    mat = sp.csr_matrix(a)
    x1 = solve_sparse(mat, b)
    x2 = solve_sparse(mat, b)
    assert np.array_equal(x1, x2)
