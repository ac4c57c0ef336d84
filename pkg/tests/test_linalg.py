import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cfgd.errors import DimensionMismatch, DomainError, NotSPD
from cfgd.linalg import (SymTridiagonal, cholesky, condition_number, extreme_singular_values,
                         power_sigma_max, spd_solve, spectral_norm, sym_eigenvalues, sym_eigvalsh,
                         tridiagonalize)

from conftest import random_spd


def test_spd_solve_identity():
    assert np.allclose(spd_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0], atol=0, rtol=1e-15)


def test_spd_solve_diagonal():
    assert np.allclose(spd_solve([[2.0, 0.0], [0.0, 2.0]], [4.0, 6.0]), [2.0, 3.0], rtol=1e-15)


def test_spd_solve_residual_small_matrix():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    x = spd_solve(A, [1.0, 2.0])
    assert np.max(np.abs(A @ x - [1.0, 2.0])) < 1e-15
    # Cramer's rule: det = 11
    assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0], rtol=1e-14)


def test_spd_solve_random_against_numpy(rng):
    A = random_spd(rng, 40)
    b = rng.standard_normal(40)
    assert np.allclose(spd_solve(A, b), np.linalg.solve(A, b), rtol=1e-11, atol=1e-12)


def test_cholesky_factor(rng):
    A = random_spd(rng, 12)
    L = cholesky(A)
    assert np.allclose(np.triu(L, 1), 0.0)
    assert np.allclose(L @ L.T, A, atol=1e-13)
    assert np.allclose(L, np.linalg.cholesky(A), atol=1e-12)


def test_not_spd_rejected():
    with pytest.raises(NotSPD):
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotSPD):
        spd_solve([[1.0, 2.0], [0.0, 1.0]], [1.0, 1.0])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        spd_solve(np.eye(3), [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        SymTridiagonal([1.0, 2.0], [1.0, 2.0])


def test_non_finite_input_rejected():
    with pytest.raises(DomainError):
        spd_solve(np.eye(2), [np.nan, 1.0])


@pytest.mark.parametrize("diag,off,expected", [
    ((2.0, 2.0), (0.0,), (2.0, 2.0)),
    ((0.0, 0.0), (1.0,), (-1.0, 1.0)),
    ((1.0, 2.0, 3.0), (0.0, 0.0), (1.0, 2.0, 3.0)),
])
def test_sym_eigenvalues_small(diag, off, expected):
    lam = sym_eigenvalues(SymTridiagonal(diag, off))
    assert np.allclose(lam, expected, atol=1e-15)


def test_sym_eigenvalues_one_by_one():
    lam, first = sym_eigenvalues(SymTridiagonal([5.0], []), first_components=True)
    assert lam.tolist() == [5.0]
    assert first.tolist() == [1.0]


def test_sym_eigenvalues_against_numpy(rng):
    d = rng.standard_normal(30)
    e = rng.standard_normal(29)
    T = SymTridiagonal(d, e)
    lam, first = sym_eigenvalues(T, first_components=True)
    ref, vec = np.linalg.eigh(T.to_dense())
    assert np.all(np.diff(lam) >= 0)
    assert np.allclose(lam, ref, atol=1e-12)
    assert np.allclose(first**2, vec[0] ** 2, atol=1e-12)


def test_tridiagonalize_preserves_spectrum(rng):
    A = random_spd(rng, 25)
    T = tridiagonalize(A)
    assert np.allclose(sym_eigenvalues(T), np.linalg.eigvalsh(A), rtol=1e-12, atol=1e-12)
    assert np.isclose(T.diagonal.sum(), np.trace(A), rtol=1e-13)


def test_sym_eigvalsh_rejects_unsymmetric():
    with pytest.raises(NotSPD):
        sym_eigvalsh([[1.0, 2.0], [0.0, 1.0]])


def test_extreme_singular_values_examples():
    assert np.allclose(extreme_singular_values(np.diag([10.0, 0.1])), (0.1, 10.0), rtol=1e-14)
    assert np.allclose(extreme_singular_values(np.eye(5)), (1.0, 1.0), rtol=1e-14)


def test_extreme_singular_values_replaced_extremes(rng):
    U, S, Vt = np.linalg.svd(rng.standard_normal((20, 20)))
    S[0], S[-1] = 10.0, 0.1
    M = (U * S) @ Vt
    smin, smax = extreme_singular_values(M)
    assert abs(smin - 0.1) < 1e-6 and abs(smax - 10.0) < 1e-6


def test_extreme_singular_values_rectangular(rng):
    M = rng.standard_normal((7, 3))
    ref = np.linalg.svd(M, compute_uv=False)
    assert np.allclose(extreme_singular_values(M), (ref[-1], ref[0]), rtol=1e-12)
    assert np.allclose(extreme_singular_values(M.T), (ref[-1], ref[0]), rtol=1e-12)


def test_power_iteration_and_spectral_norm(rng):
    M = rng.standard_normal((10, 6))
    ref = np.linalg.norm(M, 2)
    assert np.isclose(power_sigma_max(M), ref, rtol=1e-8)
    assert np.isclose(spectral_norm(M), ref, rtol=1e-12)
    assert spectral_norm(np.zeros((2, 2))) == 0.0


@pytest.mark.parametrize("A,expected", [
    (np.diag([10.0, 1.0]), 10.0),
    (np.diag([20.0, 2.0]), 10.0),
    (np.eye(4), 1.0),
])
def test_condition_number_examples(A, expected):
    assert np.isclose(condition_number(A), expected, rtol=1e-14)


def test_condition_number_rejects_indefinite():
    with pytest.raises(NotSPD):
        condition_number(np.diag([1.0, -1.0]))


def test_solve_dimension_100_residual(rng):
    A = random_spd(rng, 100)
    b = rng.standard_normal(100)
    x = spd_solve(A, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-12


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n - 1, elements=finite))))
def test_eigenvalue_sum_and_square_sum(de):
    d, e = de
    T = SymTridiagonal(d, e)
    lam, first = sym_eigenvalues(T, first_components=True)
    scale = 1.0 + np.sum(np.abs(d)) + np.sum(np.abs(e))
    # trace and Frobenius norm are spectral invariants
    assert abs(lam.sum() - d.sum()) <= 1e-12 * scale
    assert abs(np.sum(lam**2) - np.sum(T.to_dense() ** 2)) <= 1e-11 * scale**2
    assert np.all(np.diff(lam) >= 0)
    assert abs(np.sum(first**2) - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_solve_then_multiply(n, seed):
    r = np.random.default_rng(seed)
    A = random_spd(r, n)
    b = r.standard_normal(n)
    x = spd_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * (1 + np.linalg.norm(b))
