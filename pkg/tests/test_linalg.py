import math

import numpy as np
import pytest

from spectral_sbm.errors import ParameterError
from spectral_sbm.linalg import (
    ScaledMatrix,
    as_symmetric,
    jacobi_eigen,
    max_row_norm,
    pairwise_row_distances,
    project_topk,
    row_distance,
    scaled_power,
    scaled_product,
    spectral_norm,
    sym_eigen,
)


# ===== EIGENDECOMPOSITION =====

def test_sym_eigen_diagonal():
    d = sym_eigen(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(d.eigenvalues, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(d.eigenvectors), [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_sym_eigen_exchange_matrix_is_descending_algebraic():
    d = sym_eigen([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(d.eigenvalues, [1.0, -1.0], atol=1e-12)


@pytest.mark.parametrize("n", [1, 8, 50])
def test_sym_eigen_reconstructs_and_is_orthonormal(sym, n):
    m = sym(n)
    d = sym_eigen(m)
    np.testing.assert_allclose(d.reconstruct(), m, atol=1e-9)
    np.testing.assert_allclose(d.eigenvectors.T @ d.eigenvectors, np.eye(n), atol=1e-8)
    assert np.all(np.diff(d.eigenvalues) <= 0)


def test_sym_eigen_is_deterministic(sym):
    m = sym(20)
    first, second = sym_eigen(m), sym_eigen(m.copy())
    assert np.array_equal(first.eigenvalues, second.eigenvalues)
    assert np.array_equal(first.eigenvectors, second.eigenvectors)


def test_sym_eigen_rejects_asymmetric():
    with pytest.raises(ParameterError):
        sym_eigen([[1.0, 2.0], [0.0, 1.0]])


def test_jacobi_matches_lapack(sym):
    m = sym(12)
    ref = sym_eigen(m)
    jac = jacobi_eigen(m)
    np.testing.assert_allclose(jac.eigenvalues, ref.eigenvalues, atol=1e-9)
    # compare subspaces, not individual vectors
    for k in (1, 4, 12):
        np.testing.assert_allclose(jac.top(k) @ jac.top(k).T, ref.top(k) @ ref.top(k).T, atol=1e-7)


def test_sym_eigen_jacobi_method_with_repeated_eigenvalues():
    m = np.diag([2.0, 2.0, 5.0])
    d = sym_eigen(m, method="jacobi")
    np.testing.assert_allclose(d.eigenvalues, [5.0, 2.0, 2.0])


def test_n1_is_scalar_case():
    d = sym_eigen(4.0)
    assert d.eigenvalues.tolist() == [4.0]
    assert spectral_norm(-4.0) == 4.0


# ===== SCALED POWERS =====

def test_scaled_power_diagonal():
    sp = scaled_power(np.diag([2.0, 3.0]), 3)
    np.testing.assert_allclose(sp.to_dense(), np.diag([8.0, 27.0]), rtol=1e-12)
    assert sp.exponent == 3


def test_scaled_power_r1_is_exact(sym):
    m = sym(7)
    sp = scaled_power(m, 1)
    assert np.array_equal(sp.to_dense(), m)


@pytest.mark.parametrize("n, r", [(20, 6), (100, 10), (5, 2)])
def test_scaled_power_matches_naive_powering(sym, n, r):
    m = sym(n)
    naive = np.linalg.matrix_power(m, r)
    got = scaled_power(m, r).to_dense()
    assert np.max(np.abs(got - naive)) / np.max(np.abs(naive)) <= 1e-9


def test_scaled_power_base_stays_normalized(sym):
    sp = scaled_power(100.0 * sym(30), 8)
    peak = np.max(np.abs(sp.base))
    assert 0.5 <= peak <= 2.0
    assert np.array_equal(sp.base, sp.base.T)


def test_scaled_power_survives_float_overflow():
    m = np.full((50, 50), 1e3)
    sp = scaled_power(m, 200)
    # exact value is 1e3^200 * 50^199 in every entry
    expected = 200 * math.log(1e3) + 199 * math.log(50)
    assert sp.log_max_abs() == pytest.approx(expected, rel=1e-12)
    assert np.all(np.isfinite(sp.base))


def test_scaled_power_rejects_zero_exponent():
    with pytest.raises(ParameterError):
        scaled_power(np.eye(2), 0)


def test_scaled_product_chains_rectangular(rng):
    x, y, z = rng.standard_normal((3, 4)), rng.standard_normal((4, 5)), rng.standard_normal((5, 2))
    got = scaled_product([x, y, z]).to_dense()
    np.testing.assert_allclose(got, x @ y @ z, rtol=1e-12, atol=1e-12)


# ===== DISTANCES & PROJECTIONS =====

def test_row_distance_same_row_is_zero(sym):
    sp = scaled_power(sym(6), 3)
    assert row_distance(sp, 2, 2).value == 0.0


def test_row_distance_on_diagonal_power():
    sp = scaled_power(np.diag([2.0, 3.0]), 3)
    dist = row_distance(sp, 0, 1)
    assert dist.value == pytest.approx(math.sqrt(793), rel=1e-12)
    assert dist.log_value == pytest.approx(0.5 * math.log(793), rel=1e-12)


def test_row_distance_zero_within_structure_blocks():
    labels = np.array([0, 0, 0, 1, 1])
    L = np.where(labels[:, None] == labels[None, :], 0.4, 0.0)
    sp = scaled_power(L, 5)
    assert row_distance(sp, 0, 2).unit == pytest.approx(0.0, abs=1e-12)
    assert row_distance(sp, 3, 4).unit == pytest.approx(0.0, abs=1e-12)


def test_pairwise_row_distances_agree_with_row_distance(sym):
    sp = scaled_power(sym(9), 4)
    log_scale, dist = pairwise_row_distances(sp)
    assert log_scale == sp.log_scale
    assert dist[1, 7] == pytest.approx(row_distance(sp, 1, 7).unit, rel=1e-12)


def test_project_topk_full_space_is_identity(sym, rng):
    d = sym_eigen(sym(6))
    u = rng.standard_normal(6)
    np.testing.assert_allclose(project_topk(d, 6, u), u, atol=1e-9)


def test_project_topk_kills_orthogonal_complement(sym):
    d = sym_eigen(sym(6))
    u = d.eigenvectors[:, 4]
    np.testing.assert_allclose(project_topk(d, 2, u), np.zeros(6), atol=1e-9)


def test_project_topk_matches_gram_projection(sym, rng):
    d = sym_eigen(sym(6))
    u = rng.standard_normal(6)
    v = d.eigenvectors[:, :2]
    gram = v @ np.linalg.inv(v.T @ v) @ v.T
    np.testing.assert_allclose(project_topk(d, 2, u), gram @ u, atol=1e-9)


def test_project_topk_is_idempotent(sym, rng):
    d = sym_eigen(sym(15))
    once = project_topk(d, 4, rng.standard_normal(15))
    assert np.max(np.abs(project_topk(d, 4, once) - once)) <= 1e-10


@pytest.mark.parametrize("k", [0, 7])
def test_project_topk_rejects_bad_rank(sym, k):
    with pytest.raises(ParameterError):
        project_topk(sym_eigen(sym(6)), k, np.ones(6))


# ===== NORMS =====

def test_spectral_norm_examples():
    assert spectral_norm(np.diag([-5.0, 2.0])) == pytest.approx(5.0)
    assert spectral_norm(np.ones((4, 4))) == pytest.approx(4.0)


def test_spectral_norm_matches_eigenvalues(sym):
    m = sym(10)
    expected = np.max(np.abs(sym_eigen(m).eigenvalues))
    assert spectral_norm(m) == pytest.approx(expected, rel=1e-8)


def test_spectral_norm_power_method():
    m = np.diag([-5.0, 2.0, 1.0]) + 0.0
    assert spectral_norm(m, method="power") == pytest.approx(5.0, rel=1e-8)
    assert spectral_norm(np.ones((4, 4)), method="power") == pytest.approx(4.0, rel=1e-8)
    assert spectral_norm(np.zeros((3, 3)), method="power") == 0.0


def test_max_row_norm_examples():
    assert max_row_norm(np.zeros((3, 3))) == 0.0
    assert max_row_norm(np.eye(3)) == 1.0
    assert max_row_norm([[1.0, 2.0], [2.0, 1.0]]) == pytest.approx(math.sqrt(5))


def test_row_norm_product_inequality(sym):
    for _ in range(20):
        m, c = sym(8), sym(8)
        assert max_row_norm(m @ c) <= max_row_norm(m) * spectral_norm(c) + 1e-9


def test_as_symmetric_shapes():
    assert as_symmetric(3.0).shape == (1, 1)
    with pytest.raises(ParameterError):
        as_symmetric(np.ones((2, 3)))


def test_scaled_matrix_identity_roundtrip():
    np.testing.assert_allclose(ScaledMatrix.identity(3).to_dense(), np.eye(3))
