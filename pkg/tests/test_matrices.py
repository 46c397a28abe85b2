import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi.matrices import (as_matrix, duality_form, is_positive_definite, is_selfadjoint,
                                  is_selfdual, is_unitary, selfdual_defect, unitary_eigenphases)


def test_selfadjoint_examples():
    assert is_selfadjoint(np.eye(3), 1e-12)
    assert not is_selfadjoint([[0, 1j], [1j, 0]], 1e-12)
    assert is_selfadjoint([[1, 2 + 1j], [2 - 1j, 3]], 1e-12)


def test_positive_definite_examples():
    assert is_positive_definite(np.eye(2))
    assert not is_positive_definite(np.diag([1.0, -1.0]))
    assert is_positive_definite([[2, 1], [1, 2]])
    # eigenvalues 1 and 3 by the 2x2 closed form; scaling by -1 flips the verdict
    assert not is_positive_definite([[-2, -1], [-1, -2]])


def test_unitary_examples():
    assert is_unitary(np.eye(4))
    assert is_unitary(np.diag(np.exp(1j * np.array([0.3, 2.0, -1.1]))))
    assert not is_unitary(2 * np.eye(2))


def test_selfdual_examples():
    assert is_selfdual(np.eye(2))
    assert is_selfdual((0.7 - 0.2j) * np.eye(4))
    # I* A^t I for A = [[0, 1], [1, 0]] is [[0, -1], [-1, 0]]
    a = np.array([[0, 1], [1, 0]], dtype=complex)
    assert not is_selfdual(a)
    assert selfdual_defect(a) == pytest.approx(2.0)


def test_duality_form_rejects_odd_size():
    with pytest.raises(ValueError):
        duality_form(3)


def test_as_matrix_checks():
    assert as_matrix(2.0).shape == (1, 1)
    with pytest.raises(ValueError):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])
    with pytest.raises(ValueError):
        as_matrix(np.eye(2), rows=3)


def test_eigenphases_diagonal():
    ph, _ = unitary_eigenphases(np.diag(np.exp(1j * np.array([np.pi, np.pi / 3]))))
    np.testing.assert_allclose(ph, [np.pi / 3, np.pi], atol=1e-14)
    ph, _ = unitary_eigenphases(np.eye(3))
    np.testing.assert_array_equal(ph, 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(1, 5))
def test_eigenphases_reassemble(seed, L):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    h = (x + x.conj().T) / 2
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(1j * w)) @ v.conj().T
    ph, vec = unitary_eigenphases(u)
    assert np.all((0 <= ph) & (ph < 2 * np.pi))
    assert np.all(np.diff(ph) >= 0)
    np.testing.assert_allclose((vec * np.exp(1j * ph)) @ vec.conj().T, u, atol=1e-10)


def test_eigenphases_repeated_phase_gives_orthonormal_vectors():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    u = q @ np.diag(np.exp(1j * np.array([1.0, 1.0, 2.0]))) @ q.T
    _, vec = unitary_eigenphases(u)
    np.testing.assert_allclose(vec.conj().T @ vec, np.eye(3), atol=1e-12)
