import numpy as np
import pytest
import scipy.linalg

from bosonrenyi.single_particle import LatticeSpec, propagator, propagator_rows, solve_open_chain


def hopping_matrix(L, J=1.0):
    h = np.zeros((L, L))
    idx = np.arange(L - 1)
    h[idx, idx + 1] = h[idx + 1, idx] = -J
    return h


def expm_oracle(L, tJ):
    # independent route: numerical eigensolver on the dense tridiagonal matrix
    w, v = np.linalg.eigh(hopping_matrix(L))
    return (v * np.exp(-1j * w * tJ)) @ v.T


def test_single_site():
    b = solve_open_chain(LatticeSpec(1))
    assert b.eigenvalues[0] == pytest.approx(0.0, abs=1e-15)
    assert b.eigenvectors[0, 0] == pytest.approx(1.0)


def test_two_sites():
    b = solve_open_chain(LatticeSpec(2))
    np.testing.assert_allclose(b.eigenvalues, [-1.0, 1.0], atol=1e-15)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(b.eigenvectors, [[s, s], [s, -s]], atol=1e-15)


@pytest.mark.parametrize("L", [0, -3])
def test_invalid_size(L):
    with pytest.raises(ValueError):
        LatticeSpec(L)


@pytest.mark.parametrize("L", [1, 2, 3, 7, 16, 64, 257])
def test_orthogonal_and_sorted(L):
    b = solve_open_chain(LatticeSpec(L))
    x = b.eigenvectors
    np.testing.assert_allclose(x @ x.T, np.eye(L), atol=1e-12)
    np.testing.assert_allclose(x.T @ x, np.eye(L), atol=1e-12)
    assert np.all(np.diff(b.eigenvalues) > 0)
    k = np.arange(1, L + 1)
    np.testing.assert_array_equal(b.eigenvalues, -2 * np.cos(k * np.pi / (L + 1)))


@pytest.mark.parametrize("L", [2, 5, 8, 12])
def test_eigenpairs_diagonalize_hopping(L):
    b = solve_open_chain(LatticeSpec(L))
    h = hopping_matrix(L)
    for k in range(L):
        np.testing.assert_allclose(h @ b.eigenvectors[k], b.eigenvalues[k] * b.eigenvectors[k], atol=1e-12)


@pytest.mark.parametrize("L", [3, 8, 11])
def test_parity(L):
    x = solve_open_chain(LatticeSpec(L)).eigenvectors
    k = np.arange(1, L + 1)
    np.testing.assert_allclose(x[:, ::-1], ((-1.0) ** (k + 1))[:, None] * x, atol=1e-13)


def test_identity_at_zero():
    y = propagator(solve_open_chain(LatticeSpec(9)), 0.0).y
    np.testing.assert_allclose(y, np.eye(9), atol=1e-14)


def test_two_site_quarter_period():
    y = propagator(solve_open_chain(LatticeSpec(2)), np.pi / 2).y
    np.testing.assert_allclose(y, [[0, 1j], [1j, 0]], atol=1e-14)
    np.testing.assert_allclose(scipy.linalg.expm(-1j * hopping_matrix(2) * np.pi / 2), y, atol=1e-14)


def test_unitary():
    y = propagator(solve_open_chain(LatticeSpec(8)), 0.7).y
    assert np.abs(y @ y.conj().T - np.eye(8)).max() < 1e-12


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        propagator(solve_open_chain(LatticeSpec(4)), -1.0)


@pytest.mark.parametrize("L", range(1, 13))
def test_against_dense_exponential(L):
    b = solve_open_chain(LatticeSpec(L))
    for tJ in (0.0, 0.3, 1.0, 2.5, 10.0, 47.3):
        y = propagator(b, tJ).y
        np.testing.assert_allclose(y, expm_oracle(L, tJ), atol=1e-10)
        np.testing.assert_allclose(y, scipy.linalg.expm(-1j * hopping_matrix(L) * tJ), atol=1e-10)


@pytest.mark.parametrize("L", [4, 9, 20])
def test_reflection_symmetry(L):
    y = propagator(solve_open_chain(LatticeSpec(L)), 1.9).y
    np.testing.assert_allclose(y[::-1, :], y[:, ::-1], atol=1e-12)


def test_hopping_scale_only_enters_through_tJ():
    y1 = propagator(solve_open_chain(LatticeSpec(6, J=1.0)), 1.3).y
    y2 = propagator(solve_open_chain(LatticeSpec(6, J=2.5)), 1.3).y
    np.testing.assert_allclose(y1, y2, atol=1e-14)


def test_propagator_rows_block():
    b = solve_open_chain(LatticeSpec(10))
    y = propagator(b, 2.2).y
    rows, cols = np.arange(1, 10, 2), np.arange(5)
    np.testing.assert_allclose(propagator_rows(b, 2.2, rows, cols), y[np.ix_(rows, cols)], atol=1e-14)
